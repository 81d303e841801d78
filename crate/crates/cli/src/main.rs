//! `oriactive`: detector-agnostic instance selection for oriented object
//! detection annotation budgets, with persisted round state and a synthetic
//! end-to-end simulator.
//!
//! Exit codes: 0 on success, 2 for input/config errors, 3 for state or
//! adapter contract violations.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use oriactive_core::config::{config_hash, RunConfig};
use oriactive_core::geometry::{angular_deviation, riou};
use oriactive_core::io::{self, AbilityFile, MetricsFile, SelectionLine, StateFile};
use oriactive_core::observation::{
    mean_average_precision, mean_matched_iou, observe_ability, AbilityOptions, AbilitySnapshot,
    GroundTruthInstance, MAP50_IOU,
};
use oriactive_core::selector::{self, LabelPool};
use oriactive_core::simulator::{run_experiment, SimConfig, Strategy};
use oriactive_core::{Error as CoreError, PrototypeStore, RotatedBox};

#[derive(Parser)]
#[command(
    name = "oriactive",
    version,
    about = "Budgeted instance selection for oriented object detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags mirroring the run-config fields; any flag overrides the config file.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// JSON config file with flat run-config keys.
    #[arg(long, env = "ORIACTIVE_CONFIG", global = true)]
    config: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    rare_quantile: Option<f64>,
    /// greedy | static
    #[arg(long)]
    selection: Option<String>,
    /// initial | current | heldout
    #[arg(long)]
    mso_eval: Option<String>,
    /// mean | sum
    #[arg(long)]
    inter_aggregate: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn effective(&self) -> anyhow::Result<RunConfig> {
        let mut config: RunConfig = match &self.config {
            Some(path) => io::read_json(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.gamma {
            config.gamma = v;
        }
        if let Some(v) = self.beta {
            config.beta = v;
        }
        if let Some(v) = self.alpha {
            config.alpha = v;
        }
        if let Some(v) = self.rounds {
            config.rounds = v;
        }
        if let Some(v) = self.budget {
            config.budget = v;
        }
        if let Some(v) = self.rare_quantile {
            config.rare_quantile = v;
        }
        if let Some(v) = &self.selection {
            config.selection = v.parse()?;
        }
        if let Some(v) = &self.mso_eval {
            config.mso_eval = v.parse()?;
        }
        if let Some(v) = &self.inter_aggregate {
            config.inter_aggregate = v.parse()?;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the rotated IoU and angular deviation of two boxes.
    Riou {
        /// First box as "cx,cy,w,h,theta" (theta in radians).
        #[arg(long)]
        a: String,
        /// Second box, same format.
        #[arg(long)]
        b: String,
    },
    /// Observe the model state from evaluation predictions and ground truth;
    /// writes ability.json and stores the observation into the state file.
    Observe {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score all candidate predictions, select under the budget, and advance
    /// the round state.
    Select {
        /// Candidate predictions (all unlabeled instances).
        #[arg(long)]
        predictions: PathBuf,
        /// Ground truth for the selected ids (the annotation oracle). Without
        /// it, picks keep their pseudo-categories.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate predictions against ground truth: per-category AP, mAP50,
    /// mean matched IoU.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Build a round-zero state file from the initially labeled instances:
    /// their ground truth plus detector predictions carrying features.
    Init {
        /// Detector predictions on the initially labeled instances.
        #[arg(long)]
        predictions: PathBuf,
        /// Ground truth of the same instances.
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the synthetic end-to-end experiment for one strategy.
    Simulate {
        /// Simulator config JSON (flat keys; run-config keys included).
        #[arg(long)]
        config: Option<PathBuf>,
        /// active | random | static
        #[arg(long)]
        strategy: String,
        /// Comma-separated master seeds, e.g. "1,2,3,4,5".
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV export of the per-round ability trajectories.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn parse_box(text: &str) -> anyhow::Result<RotatedBox> {
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    if fields.len() != 5 {
        return Err(anyhow!("expected 5 comma-separated numbers, got `{text}`"));
    }
    let mut values = [0.0f64; 5];
    for (slot, field) in values.iter_mut().zip(&fields) {
        *slot = field
            .parse()
            .with_context(|| format!("cannot parse `{field}` as a number"))?;
    }
    Ok(RotatedBox::from_array(values)?)
}

fn cmd_riou(a: &str, b: &str) -> anyhow::Result<()> {
    let a = parse_box(a)?;
    let b = parse_box(b)?;
    let iou = riou(&a, &b);
    let dtheta = angular_deviation(&a, &b);
    println!("riou={iou:.6} dtheta={dtheta:.6}");
    Ok(())
}

fn ability_options(config: &RunConfig) -> AbilityOptions {
    AbilityOptions {
        rare_quantile: config.rare_quantile,
        inter_aggregate: config.inter_aggregate.into(),
        iou_threshold: MAP50_IOU,
    }
}

fn cmd_observe(
    predictions: &Path,
    gt: &Path,
    state_path: &Path,
    out: &Path,
    config: &RunConfig,
) -> anyhow::Result<()> {
    let preds = io::read_predictions(predictions)?;
    let gts = io::read_ground_truth(gt)?;
    let mut state: StateFile = io::read_json(state_path)?;
    let report = observe_ability(&preds, &gts, &state.category_counts, &ability_options(config))?;
    let snapshot = AbilitySnapshot::from(&report);
    io::write_json(out, &AbilityFile { snapshot: snapshot.clone(), config: config.clone() })?;
    state.ability = Some(snapshot);
    state.config_hash = config_hash(config);
    io::write_json(state_path, &state)?;
    Ok(())
}

fn cmd_select(
    predictions: &Path,
    gt: Option<&Path>,
    state_path: &Path,
    out: &Path,
    config: &RunConfig,
) -> anyhow::Result<()> {
    let state: StateFile = io::read_json(state_path)?;
    let labeled = state.labeled_set();
    let candidates = io::read_predictions(predictions)?;

    // the candidate file defines the unlabeled set; ids must be present,
    // unique, and disjoint from the labeled set
    let mut unlabeled: BTreeSet<String> = BTreeSet::new();
    for candidate in &candidates {
        let id = candidate
            .instance_id
            .as_deref()
            .ok_or_else(|| CoreError::ContractViolation("candidate without instance_id".into()))?;
        if labeled.contains(id) {
            return Err(CoreError::ContractViolation(format!(
                "candidate `{id}` is already labeled"
            ))
            .into());
        }
        if !unlabeled.insert(id.to_string()) {
            return Err(
                CoreError::ContractViolation(format!("duplicate candidate `{id}`")).into()
            );
        }
    }

    let mut pool = LabelPool::from_parts(labeled, unlabeled, state.round)?;
    let mut store = state.to_store(config.alpha, config.gamma)?;

    let mut records = Vec::new();
    if config.budget > 0 {
        let snapshot = state.ability.as_ref().ok_or_else(|| {
            CoreError::ContractViolation(
                "state has no ability observation; run `observe` first".into(),
            )
        })?;
        let ability = snapshot.to_vector()?;
        records = selector::select(config.selection, &candidates, &mut store, &ability, config.budget)?;
        match gt {
            Some(gt_path) => {
                let gts = io::read_ground_truth(gt_path)?;
                let by_id: BTreeMap<&str, &GroundTruthInstance> =
                    gts.iter().map(|g| (g.instance_id.as_str(), g)).collect();
                selector::annotate(&mut pool, &records, &mut store, |id| {
                    by_id.get(id).map(|g| (*g).clone())
                })?;
            }
            None => selector::commit_selections(&mut pool, &records)?,
        }
    }
    pool.advance_round();

    let lines: Vec<SelectionLine> = records.iter().map(SelectionLine::from).collect();
    io::write_jsonl(out, &lines)?;
    let new_state =
        StateFile::capture(&pool, &store, state.ability.clone(), config_hash(config));
    io::write_json(state_path, &new_state)?;
    Ok(())
}

fn cmd_evaluate(
    predictions: &Path,
    gt: &Path,
    out: &Path,
    config: &RunConfig,
) -> anyhow::Result<()> {
    let preds = io::read_predictions(predictions)?;
    let gts = io::read_ground_truth(gt)?;
    let (per_category_ap, map50) = mean_average_precision(&preds, &gts, MAP50_IOU)?;
    let mean_iou = mean_matched_iou(&preds, &gts);
    io::write_json(
        out,
        &MetricsFile { per_category_ap, map50, mean_iou, config: config.clone() },
    )?;
    Ok(())
}

fn cmd_init(predictions: &Path, gt: &Path, out: &Path, config: &RunConfig) -> anyhow::Result<()> {
    let preds = io::read_predictions(predictions)?;
    let gts = io::read_ground_truth(gt)?;
    let by_id: BTreeMap<&str, &GroundTruthInstance> =
        gts.iter().map(|g| (g.instance_id.as_str(), g)).collect();
    let mut labeled = BTreeSet::new();
    let mut pairs = Vec::with_capacity(preds.len());
    for pred in &preds {
        let id = pred
            .instance_id
            .as_deref()
            .ok_or_else(|| anyhow!("labeled prediction without instance_id"))?;
        let gt = by_id
            .get(id)
            .ok_or_else(|| anyhow!("no ground truth for labeled instance `{id}`"))?;
        if !labeled.insert(id.to_string()) {
            return Err(anyhow!("duplicate labeled instance `{id}`"));
        }
        pairs.push((gt.category_id, pred.feature.clone()));
    }
    let store = PrototypeStore::init_prototypes(&pairs, config.alpha, config.gamma)?;
    let pool = LabelPool::new(labeled, BTreeSet::new())?;
    let state = StateFile::capture(&pool, &store, None, config_hash(config));
    io::write_json(out, &state)?;
    Ok(())
}

fn cmd_simulate(
    config_path: Option<&Path>,
    strategy: &str,
    seeds: &str,
    out: &Path,
    csv: Option<&Path>,
) -> anyhow::Result<()> {
    let config: SimConfig = match config_path {
        Some(path) => io::read_json(path)?,
        None => SimConfig::default(),
    };
    let strategy: Strategy = strategy.parse()?;
    let seeds: Vec<u64> = seeds
        .split(',')
        .map(|s| s.trim().parse::<u64>().with_context(|| format!("bad seed `{s}`")))
        .collect::<anyhow::Result<_>>()?;
    let report = run_experiment(strategy, &seeds, &config)?;
    io::write_json(out, &report)?;
    if let Some(csv_path) = csv {
        let mut text =
            String::from("seed,round,a_cls,a_loc,a_inter,a_intra,a_bar,labeled_after\n");
        for outcome in &report.per_seed {
            for round in &outcome.rounds {
                let a = &round.ability;
                text.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    outcome.seed,
                    round.round,
                    io::round9(a.a_cls),
                    io::round9(a.a_loc),
                    io::round9(a.a_inter),
                    io::round9(a.a_intra),
                    io::round9(a.a_bar),
                    round.labeled_after,
                ));
            }
        }
        std::fs::write(csv_path, text)
            .with_context(|| format!("writing {}", csv_path.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Riou { a, b } => cmd_riou(&a, &b),
        Command::Observe { predictions, gt, state, out, config } => {
            let config = config.effective()?;
            cmd_observe(&predictions, &gt, &state, &out, &config)
        }
        Command::Select { predictions, gt, state, out, config } => {
            let config = config.effective()?;
            cmd_select(&predictions, gt.as_deref(), &state, &out, &config)
        }
        Command::Evaluate { predictions, gt, out, config } => {
            let config = config.effective()?;
            cmd_evaluate(&predictions, &gt, &out, &config)
        }
        Command::Init { predictions, gt, out, config } => {
            let config = config.effective()?;
            cmd_init(&predictions, &gt, &out, &config)
        }
        Command::Simulate { config, strategy, seeds, out, csv } => {
            cmd_simulate(config.as_deref(), &strategy, &seeds, &out, csv.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let contract = err
                .chain()
                .any(|e| matches!(e.downcast_ref(), Some(CoreError::ContractViolation(_))));
            if contract {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
