//! Run configuration shared by the selection engine, the CLI, and the
//! simulator.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::observation::InterAggregate;

/// How a round turns scores into picks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// Sequential argmax with prototype/count updates between picks.
    Greedy,
    /// One-shot top-K by the initial scores, updates applied afterwards.
    Static,
}

/// Which instance set the model state is observed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MsoEval {
    /// The initially annotated set (the default).
    Initial,
    /// The current labeled set.
    Current,
    /// An externally supplied held-out set.
    Heldout,
}

fn default_gamma() -> f64 {
    0.01
}
fn default_beta() -> f64 {
    0.5
}
fn default_alpha() -> f64 {
    0.9
}
fn default_rounds() -> u32 {
    2
}
fn default_budget() -> usize {
    200
}
fn default_rare_quantile() -> f64 {
    1.0 / 3.0
}
fn default_selection() -> SelectionMode {
    SelectionMode::Greedy
}
fn default_mso_eval() -> MsoEval {
    MsoEval::Initial
}
fn default_inter_aggregate() -> InterAggregateConfig {
    InterAggregateConfig::Mean
}

/// Serializable mirror of [`InterAggregate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterAggregateConfig {
    Mean,
    Sum,
}

impl From<InterAggregateConfig> for InterAggregate {
    fn from(v: InterAggregateConfig) -> Self {
        match v {
            InterAggregateConfig::Mean => InterAggregate::Mean,
            InterAggregateConfig::Sum => InterAggregate::Sum,
        }
    }
}

/// Flat run configuration; every field has a shipped default and maps onto a
/// CLI flag of the same name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Smoothing of the inter-category diversity sigmoid.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Aspect-ratio sensitivity of the fused localization/orientation target.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// EMA momentum of category prototypes.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Number of selection rounds.
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    /// Instances annotated per round.
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Labeled-count quantile at or below which a category counts as rare.
    #[serde(default = "default_rare_quantile")]
    pub rare_quantile: f64,
    #[serde(default = "default_selection")]
    pub selection: SelectionMode,
    #[serde(default = "default_mso_eval")]
    pub mso_eval: MsoEval,
    #[serde(default = "default_inter_aggregate")]
    pub inter_aggregate: InterAggregateConfig,
    /// Master seed; all randomness derives from it.
    #[serde(default)]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gamma: default_gamma(),
            beta: default_beta(),
            alpha: default_alpha(),
            rounds: default_rounds(),
            budget: default_budget(),
            rare_quantile: default_rare_quantile(),
            selection: default_selection(),
            mso_eval: default_mso_eval(),
            inter_aggregate: default_inter_aggregate(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma <= 0.0 {
            return Err(Error::invalid("gamma must be positive"));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::invalid("beta must be non-negative"));
        }
        if !self.alpha.is_finite() || !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::invalid("alpha must lie in [0, 1)"));
        }
        if !self.rare_quantile.is_finite() || !(0.0..=1.0).contains(&self.rare_quantile) {
            return Err(Error::invalid("rare_quantile must lie in [0, 1]"));
        }
        Ok(())
    }
}

impl std::str::FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(SelectionMode::Greedy),
            "static" => Ok(SelectionMode::Static),
            other => Err(Error::invalid(format!("unknown selection mode `{other}`"))),
        }
    }
}

impl std::str::FromStr for MsoEval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "initial" => Ok(MsoEval::Initial),
            "current" => Ok(MsoEval::Current),
            "heldout" => Ok(MsoEval::Heldout),
            other => Err(Error::invalid(format!("unknown mso_eval mode `{other}`"))),
        }
    }
}

impl std::str::FromStr for InterAggregateConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(InterAggregateConfig::Mean),
            "sum" => Ok(InterAggregateConfig::Sum),
            other => Err(Error::invalid(format!("unknown inter_aggregate mode `{other}`"))),
        }
    }
}

/// Hex SHA-256 of a configuration's canonical JSON, echoed into state files.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
