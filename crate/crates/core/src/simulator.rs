//! Deterministic synthetic scenes plus a responsive synthetic detector that
//! implements the model-adapter contract, for desk-scale end-to-end runs and
//! active-vs-random comparisons.
//!
//! All randomness fans out from one master seed through named SHA-256
//! substreams; per-instance prediction noise is keyed by instance id, so
//! results do not depend on evaluation order. The detector's skill dynamics
//! read only labeled counts (per category and per difficulty bucket), never
//! scores, so informative selection has a causal path to measurable gains
//! without baking the scorer's formulas into the dynamics.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, StandardNormal, Zipf};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, SelectionMode};
use crate::diversity::{FeatureVector, PrototypeStore};
use crate::error::{Error, Result};
use crate::geometry::RotatedBox;
use crate::observation::{
    mean_average_precision, observe_ability, AbilityOptions, AbilitySnapshot,
    GroundTruthInstance, InstancePrediction, MAP50_IOU,
};
use crate::selector::{run_round, InstanceId, LabelPool, ModelAdapter, RoundContext};
use crate::uncertainty::{loc_orient_target, CategoryDistribution};

/// A deterministic RNG derived from the master seed and a tag path.
pub fn substream(master: u64, tags: &[&str]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for tag in tags {
        hasher.update([0xff]);
        hasher.update(tag.as_bytes());
    }
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

fn default_categories() -> u32 {
    15
}
fn default_instances() -> u32 {
    20_000
}
fn default_feature_dim() -> usize {
    32
}
fn default_zipf_exponent() -> f64 {
    1.1
}
fn default_modes() -> u32 {
    3
}
fn default_canvas() -> f64 {
    1024.0
}
fn default_size_min() -> f64 {
    8.0
}
fn default_size_max() -> f64 {
    256.0
}
fn default_instances_per_image() -> u32 {
    50
}
fn default_test_instances() -> u32 {
    2_000
}
fn default_initial_percent() -> f64 {
    1.0
}
fn default_base_skill() -> f64 {
    0.2
}
fn default_lambda_cls() -> f64 {
    0.05
}
fn default_lambda_loc() -> f64 {
    0.02
}
fn default_sigma_lup() -> f64 {
    0.05
}
fn default_feature_noise() -> f64 {
    0.1
}

/// Synthetic-world constants plus the embedded run configuration; the JSON
/// form is flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    #[serde(default = "default_categories")]
    pub categories: u32,
    #[serde(default = "default_instances")]
    pub instances: u32,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default = "default_zipf_exponent")]
    pub zipf_exponent: f64,
    /// Intra-category feature modes.
    #[serde(default = "default_modes")]
    pub modes: u32,
    #[serde(default = "default_canvas")]
    pub canvas: f64,
    #[serde(default = "default_size_min")]
    pub size_min: f64,
    #[serde(default = "default_size_max")]
    pub size_max: f64,
    #[serde(default = "default_instances_per_image")]
    pub instances_per_image: u32,
    /// Held-out instances the final detector state is evaluated on.
    #[serde(default = "default_test_instances")]
    pub test_instances: u32,
    /// Initially labeled share of the training instances, in percent.
    #[serde(default = "default_initial_percent")]
    pub initial_percent: f64,
    /// Skill floor of an untrained dimension.
    #[serde(default = "default_base_skill")]
    pub base_skill: f64,
    /// Per-label classification skill gain rate.
    #[serde(default = "default_lambda_cls")]
    pub lambda_cls: f64,
    /// Per-label regression skill gain rate.
    #[serde(default = "default_lambda_loc")]
    pub lambda_loc: f64,
    /// Noise of the detector's own uncertainty estimate.
    #[serde(default = "default_sigma_lup")]
    pub sigma_lup: f64,
    /// Noise added to true features in predictions.
    #[serde(default = "default_feature_noise")]
    pub feature_noise: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        if self.categories < 2 {
            return Err(Error::invalid("need at least two categories"));
        }
        if self.instances < self.categories {
            return Err(Error::invalid("need at least one instance per category"));
        }
        if self.feature_dim == 0 || self.modes == 0 || self.instances_per_image == 0 {
            return Err(Error::invalid("feature_dim, modes, instances_per_image must be positive"));
        }
        for (name, v) in [("zipf_exponent", self.zipf_exponent), ("canvas", self.canvas), ("size_min", self.size_min)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if self.size_max < self.size_min {
            return Err(Error::invalid("sizes must satisfy size_min <= size_max"));
        }
        if self.test_instances == 0 {
            return Err(Error::invalid("need a non-empty test split"));
        }
        if !(0.0..=100.0).contains(&self.initial_percent) {
            return Err(Error::invalid("initial_percent must lie in [0, 100]"));
        }
        if !(0.0..=1.0).contains(&self.base_skill) {
            return Err(Error::invalid("base_skill must lie in [0, 1]"));
        }
        if self.lambda_cls < 0.0 || self.lambda_loc < 0.0 {
            return Err(Error::invalid("skill gain rates must be non-negative"));
        }
        if self.sigma_lup < 0.0 || self.feature_noise < 0.0 {
            return Err(Error::invalid("noise levels must be non-negative"));
        }
        Ok(())
    }
}

/// One synthetic annotated object.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    pub instance_id: InstanceId,
    pub image_id: String,
    pub category: u32,
    pub gt_box: RotatedBox,
    /// Latent difficulty in [0, 1]; harder instances get noisier predictions.
    pub difficulty: f64,
    pub true_feature: FeatureVector,
}

impl SyntheticInstance {
    pub fn ground_truth(&self) -> GroundTruthInstance {
        GroundTruthInstance {
            image_id: self.image_id.clone(),
            instance_id: self.instance_id.clone(),
            category_id: self.category,
            r#box: self.gt_box,
        }
    }
}

/// A generated world: training instances, a held-out test split, and the
/// initially labeled ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub train: Vec<SyntheticInstance>,
    pub test: Vec<SyntheticInstance>,
    pub initial_labeled: BTreeSet<InstanceId>,
}

impl SyntheticDataset {
    pub fn instance(&self, id: &str) -> Option<&SyntheticInstance> {
        // ids are "i......" for train and "t......" for test, both sorted
        let split = if id.starts_with('t') { &self.test } else { &self.train };
        split.binary_search_by(|inst| inst.instance_id.as_str().cmp(id)).ok().map(|i| &split[i])
    }

    pub fn initial_pool(&self) -> Result<LabelPool> {
        let all: BTreeSet<InstanceId> =
            self.train.iter().map(|i| i.instance_id.clone()).collect();
        let unlabeled: BTreeSet<InstanceId> =
            all.difference(&self.initial_labeled).cloned().collect();
        LabelPool::new(self.initial_labeled.clone(), unlabeled)
    }
}

fn sample_instance(
    rng: &mut ChaCha8Rng,
    config: &SimConfig,
    category: u32,
    archetypes: &[Vec<f64>],
    mode_offsets: &[Vec<Vec<f64>>],
    beta: &Beta<f64>,
) -> Result<(RotatedBox, f64, FeatureVector)> {
    let cx = rng.gen::<f64>() * config.canvas;
    let cy = rng.gen::<f64>() * config.canvas;
    let log_span = (config.size_max / config.size_min).ln();
    let w = config.size_min * (rng.gen::<f64>() * log_span).exp();
    let h = config.size_min * (rng.gen::<f64>() * log_span).exp();
    let theta = (rng.gen::<f64>() - 0.5) * std::f64::consts::PI;
    let gt_box = RotatedBox::new(cx, cy, w, h, theta)?;
    let difficulty = beta.sample(rng);
    let mode = rng.gen_range(0..config.modes) as usize;
    let mut feature: Vec<f64> = archetypes[category as usize]
        .iter()
        .zip(&mode_offsets[category as usize][mode])
        .map(|(a, m)| a + m + 0.15 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let norm = feature.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    feature.iter_mut().for_each(|v| *v /= norm);
    Ok((gt_box, difficulty, FeatureVector::new(feature)?))
}

/// Generates the synthetic world for one seed: Zipf long-tail categories,
/// uniform centers, log-uniform sizes, uniform angles, Beta(2,2) difficulty,
/// and unit features built from category archetypes plus intra-category mode
/// offsets. The initially labeled set is a uniform sample of
/// `initial_percent` of the training split, topped up so every category has
/// at least one labeled instance.
pub fn generate_dataset(config: &SimConfig, seed: u64) -> Result<SyntheticDataset> {
    config.validate()?;
    let mut rng = substream(seed, &["dataset"]);
    let c = config.categories as usize;

    let archetypes: Vec<Vec<f64>> = (0..c)
        .map(|_| (0..config.feature_dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let mode_offsets: Vec<Vec<Vec<f64>>> = (0..c)
        .map(|_| {
            (0..config.modes)
                .map(|_| {
                    (0..config.feature_dim)
                        .map(|_| 0.6 * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect()
        })
        .collect();

    let zipf = Zipf::new(u64::from(config.categories), config.zipf_exponent)
        .map_err(|e| Error::invalid(format!("zipf: {e}")))?;
    let beta = Beta::new(2.0, 2.0).expect("valid beta");

    let make_split = |prefix_inst: &str,
                          prefix_img: &str,
                          count: u32,
                          rng: &mut ChaCha8Rng,
                          force_cover: bool|
     -> Result<Vec<SyntheticInstance>> {
        let mut out = Vec::with_capacity(count as usize);
        for i in 0..count {
            // the first C instances cover every category so the one-per-
            // category initialization rule is always satisfiable
            let category = if force_cover && i < config.categories {
                i
            } else {
                zipf.sample(rng) as u32 - 1
            };
            let (gt_box, difficulty, true_feature) =
                sample_instance(rng, config, category, &archetypes, &mode_offsets, &beta)?;
            out.push(SyntheticInstance {
                instance_id: format!("{prefix_inst}{i:06}"),
                image_id: format!("{prefix_img}{:05}", i / config.instances_per_image),
                category,
                gt_box,
                difficulty,
                true_feature,
            });
        }
        Ok(out)
    };

    let train = make_split("i", "img", config.instances, &mut rng, true)?;
    let test = make_split("t", "timg", config.test_instances, &mut rng, false)?;

    // initial labels: uniform sample of p%, then one-per-category top-up
    let mut init_rng = substream(seed, &["init"]);
    let target = ((config.initial_percent / 100.0) * f64::from(config.instances)).round() as usize;
    let target = target.min(train.len());
    let picks = rand::seq::index::sample(&mut init_rng, train.len(), target);
    let mut initial_labeled: BTreeSet<InstanceId> =
        picks.iter().map(|i| train[i].instance_id.clone()).collect();
    let mut covered: BTreeSet<u32> = initial_labeled
        .iter()
        .filter_map(|id| {
            train
                .binary_search_by(|inst| inst.instance_id.as_str().cmp(id))
                .ok()
                .map(|i| train[i].category)
        })
        .collect();
    for inst in &train {
        if covered.len() == c {
            break;
        }
        if covered.insert(inst.category) {
            initial_labeled.insert(inst.instance_id.clone());
        }
    }

    Ok(SyntheticDataset { train, test, initial_labeled })
}

/// The synthetic detector's skill state: per-category classification skill
/// and per-difficulty-tercile regression skill, both in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    pub cls_skill: Vec<f64>,
    pub reg_skill: [f64; 3],
    pub sigma_lup: f64,
    pub seed: u64,
    /// Retrain generation; prediction noise is keyed by it.
    pub generation: u32,
}

fn tercile(difficulty: f64) -> usize {
    if difficulty < 1.0 / 3.0 {
        0
    } else if difficulty < 2.0 / 3.0 {
        1
    } else {
        2
    }
}

impl DetectorState {
    /// Fresh state with every skill at the floor.
    pub fn untrained(config: &SimConfig, seed: u64) -> Self {
        Self {
            cls_skill: vec![config.base_skill; config.categories as usize],
            reg_skill: [config.base_skill; 3],
            sigma_lup: config.sigma_lup,
            seed,
            generation: 0,
        }
    }

    /// Recomputes skills from the labeled counts:
    /// `skill = 1 - (1 - base) * exp(-lambda * n)` per category and per
    /// difficulty tercile. Deterministic; bumps the noise generation.
    pub fn retrain(&mut self, config: &SimConfig, labeled: &[&SyntheticInstance]) {
        let mut cat_counts = vec![0u64; config.categories as usize];
        let mut ter_counts = [0u64; 3];
        for inst in labeled {
            cat_counts[inst.category as usize] += 1;
            ter_counts[tercile(inst.difficulty)] += 1;
        }
        let skill = |lambda: f64, n: u64| {
            1.0 - (1.0 - config.base_skill) * (-lambda * n as f64).exp()
        };
        self.cls_skill =
            cat_counts.iter().map(|&n| skill(config.lambda_cls, n)).collect();
        self.reg_skill = ter_counts.map(|n| skill(config.lambda_loc, n));
        self.generation += 1;
    }
}

/// Predicts one instance under the current state. Noise comes from a
/// substream keyed by `(seed, generation, instance_id)`, so per-instance
/// prediction is order-independent.
pub fn detector_predict_one(
    state: &DetectorState,
    config: &SimConfig,
    inst: &SyntheticInstance,
) -> Result<InstancePrediction> {
    let gen_tag = state.generation.to_string();
    let mut rng = substream(state.seed, &["predict", &gen_tag, &inst.instance_id]);
    let c = config.categories as usize;

    // box: ground truth corrupted proportionally to (1 - skill) * (1 + d)
    let reg = state.reg_skill[tercile(inst.difficulty)];
    let scale = (1.0 - reg) * (1.0 + inst.difficulty);
    let n: [f64; 5] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let b = inst.gt_box;
    let pred_box = RotatedBox::new(
        b.cx() + 0.095 * b.w() * scale * n[0],
        b.cy() + 0.095 * b.h() * scale * n[1],
        b.w() * (0.095 * scale * n[2]).exp(),
        b.h() * (0.095 * scale * n[3]).exp(),
        b.theta() + 0.15 * scale * n[4],
    )?;

    // probs: a majority share on the (possibly confused) peak category plus
    // a uniform-Dirichlet remainder. The share is always above one half so
    // the argmax equals the peak; skill shows up as both a lower confusion
    // probability and a sharper peak.
    let cls = state.cls_skill[inst.category as usize];
    let p_correct = (1.0 - (1.0 - cls) * (0.3 + 0.45 * inst.difficulty)).clamp(0.0, 1.0);
    let peak = if rng.gen::<f64>() < p_correct {
        inst.category
    } else {
        (inst.category + 1) % config.categories
    };
    let q = 0.5 + 0.45 * cls * (1.0 - 0.5 * inst.difficulty);
    let mut noise: Vec<f64> = (0..c).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let noise_sum: f64 = noise.iter().sum();
    noise.iter_mut().for_each(|v| *v = *v / noise_sum * (1.0 - q));
    noise[peak as usize] += q;
    let probs = CategoryDistribution::from_scores(noise)?;

    let feature: Vec<f64> = inst
        .true_feature
        .values()
        .iter()
        .map(|v| v + config.feature_noise * rng.sample::<f64, _>(StandardNormal))
        .collect();

    // the detector's own uncertainty estimate: the true fused target plus noise
    let target = loc_orient_target(&pred_box, &inst.gt_box, config.run.beta)?;
    let lup_noise: f64 = rng.sample(StandardNormal);
    let pred_loc_unc = (target.u_fused + state.sigma_lup * lup_noise).clamp(0.0, 1.0);

    InstancePrediction::new(
        inst.image_id.clone(),
        Some(inst.instance_id.clone()),
        pred_box,
        probs,
        FeatureVector::new(feature)?,
        pred_loc_unc,
    )
}

/// Predictions for a batch of instances.
pub fn detector_predict(
    state: &DetectorState,
    config: &SimConfig,
    instances: &[&SyntheticInstance],
) -> Result<Vec<InstancePrediction>> {
    instances.iter().map(|inst| detector_predict_one(state, config, inst)).collect()
}

/// The synthetic detector behind the adapter contract.
pub struct SimAdapter<'a> {
    dataset: &'a SyntheticDataset,
    config: &'a SimConfig,
    pub state: DetectorState,
}

impl<'a> SimAdapter<'a> {
    /// Builds the adapter and trains the initial state on the pool's labels.
    pub fn new(dataset: &'a SyntheticDataset, config: &'a SimConfig, seed: u64, pool: &LabelPool) -> Result<Self> {
        let mut adapter =
            Self { dataset, config, state: DetectorState::untrained(config, seed) };
        let labeled = adapter.lookup_all(pool.labeled())?;
        adapter.state.retrain(config, &labeled);
        Ok(adapter)
    }

    fn lookup(&self, id: &str) -> Result<&'a SyntheticInstance> {
        self.dataset
            .instance(id)
            .ok_or_else(|| Error::contract(format!("unknown instance id `{id}`")))
    }

    fn lookup_all(&self, ids: &BTreeSet<InstanceId>) -> Result<Vec<&'a SyntheticInstance>> {
        ids.iter().map(|id| self.lookup(id)).collect()
    }

    /// Mean-feature prototypes over the pool's labeled instances, under their
    /// true categories, from the current detector's features.
    pub fn init_store(&self, pool: &LabelPool) -> Result<PrototypeStore> {
        let labeled = self.lookup_all(pool.labeled())?;
        let preds = detector_predict(&self.state, self.config, &labeled)?;
        let pairs: Vec<(u32, FeatureVector)> = labeled
            .iter()
            .zip(preds)
            .map(|(inst, pred)| (inst.category, pred.feature))
            .collect();
        PrototypeStore::init_prototypes(&pairs, self.config.run.alpha, self.config.run.gamma)
    }
}

impl ModelAdapter for SimAdapter<'_> {
    fn predict_unlabeled(&mut self, pool: &LabelPool) -> Result<Vec<InstancePrediction>> {
        let instances = self.lookup_all(pool.unlabeled())?;
        detector_predict(&self.state, self.config, &instances)
    }

    fn predict_eval(
        &mut self,
        eval_ids: &BTreeSet<InstanceId>,
    ) -> Result<Vec<InstancePrediction>> {
        let instances = self.lookup_all(eval_ids)?;
        detector_predict(&self.state, self.config, &instances)
    }

    fn ground_truth(&self, id: &str) -> Option<GroundTruthInstance> {
        self.dataset.instance(id).map(SyntheticInstance::ground_truth)
    }

    fn retrain(&mut self, pool: &LabelPool) -> Result<()> {
        let labeled = self.lookup_all(pool.labeled())?;
        self.state.retrain(self.config, &labeled);
        Ok(())
    }
}

/// Selection policy compared by the experiment runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// The full state-weighted greedy pipeline.
    Active,
    /// Uniform random picks.
    Random,
    /// One-shot top-K without in-round updates.
    Static,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "active" => Ok(Strategy::Active),
            "random" => Ok(Strategy::Random),
            "static" => Ok(Strategy::Static),
            other => Err(Error::invalid(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Per-round trajectory entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: u32,
    pub ability: AbilitySnapshot,
    pub selected: Vec<InstanceId>,
    pub labeled_after: usize,
}

/// One seed's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub map50: f64,
    pub per_category_ap: BTreeMap<u32, f64>,
    pub rounds: Vec<RoundSummary>,
    pub final_labeled: usize,
    pub category_counts: BTreeMap<u32, u64>,
    /// Concentration of the final per-category labeled counts.
    pub gini_labeled: f64,
}

/// The full experiment report, echoing the effective configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub strategy: Strategy,
    pub config: SimConfig,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedOutcome>,
    pub mean_map50: f64,
    /// Population variance across seeds.
    pub var_map50: f64,
}

/// Gini coefficient of a count vector (zero for uniform counts).
pub fn gini(counts: &[u64]) -> f64 {
    if counts.is_empty() {
        return 0.0;
    }
    let n = counts.len() as f64;
    let total: f64 = counts.iter().map(|&c| c as f64).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut abs_diff = 0.0;
    for &a in counts {
        for &b in counts {
            abs_diff += (a as f64 - b as f64).abs();
        }
    }
    abs_diff / (2.0 * n * n * (total / n))
}

fn ability_options(config: &SimConfig) -> AbilityOptions {
    AbilityOptions {
        rare_quantile: config.run.rare_quantile,
        inter_aggregate: config.run.inter_aggregate.into(),
        iou_threshold: MAP50_IOU,
    }
}

/// One random-baseline round: observe the state (for the trajectory), pick
/// uniformly, annotate with true categories, retrain.
fn run_random_round(
    pool: &mut LabelPool,
    store: &mut PrototypeStore,
    adapter: &mut SimAdapter<'_>,
    config: &SimConfig,
    ctx: &RoundContext,
    seed: u64,
) -> Result<RoundSummary> {
    let eval_ids = ctx.initial_labeled.clone();
    let eval_preds = adapter.predict_eval(&eval_ids)?;
    let eval_gts: Vec<GroundTruthInstance> = eval_ids
        .iter()
        .map(|id| adapter.ground_truth(id).ok_or_else(|| Error::contract("missing gt")))
        .collect::<Result<_>>()?;
    let counts: BTreeMap<u32, u64> = store.entries().map(|(c, _, n)| (c, n)).collect();
    let ability = observe_ability(&eval_preds, &eval_gts, &counts, &ability_options(config))?;

    let mut selected = Vec::new();
    if config.run.budget > 0 {
        let unlabeled: Vec<&InstanceId> = pool.unlabeled().iter().collect();
        if config.run.budget > unlabeled.len() {
            return Err(Error::invalid("budget exceeds the unlabeled pool"));
        }
        let round_tag = pool.round().to_string();
        let mut rng = substream(seed, &["random-pick", &round_tag]);
        let picks = rand::seq::index::sample(&mut rng, unlabeled.len(), config.run.budget);
        let mut ids: Vec<InstanceId> = picks.iter().map(|i| unlabeled[i].clone()).collect();
        ids.sort();
        for id in &ids {
            let gt = adapter
                .ground_truth(id)
                .ok_or_else(|| Error::contract(format!("no ground truth for `{id}`")))?;
            store.increment_count(gt.category_id);
            pool.mark_labeled(id)?;
        }
        adapter.retrain(pool)?;
        selected = ids;
    }
    pool.advance_round();
    Ok(RoundSummary {
        round: pool.round(),
        ability: AbilitySnapshot::from(&ability),
        selected,
        labeled_after: pool.labeled().len(),
    })
}

/// Runs one seed of one strategy end to end and evaluates the final detector
/// state on the held-out test split.
pub fn run_seed(strategy: Strategy, config: &SimConfig, seed: u64) -> Result<SeedOutcome> {
    let dataset = generate_dataset(config, seed)?;
    let mut pool = dataset.initial_pool()?;
    let mut adapter = SimAdapter::new(&dataset, config, seed, &pool)?;
    let mut store = adapter.init_store(&pool)?;
    let ctx = RoundContext { initial_labeled: pool.labeled().clone(), heldout: None };

    let mut rounds = Vec::new();
    for _ in 0..config.run.rounds {
        let summary = match strategy {
            Strategy::Random => {
                run_random_round(&mut pool, &mut store, &mut adapter, config, &ctx, seed)?
            }
            Strategy::Active | Strategy::Static => {
                let mut run = config.run.clone();
                run.selection = match strategy {
                    Strategy::Active => SelectionMode::Greedy,
                    _ => SelectionMode::Static,
                };
                let report = run_round(&mut pool, &mut store, &mut adapter, &run, &ctx)?;
                RoundSummary {
                    round: report.round,
                    ability: AbilitySnapshot::from(&report.ability),
                    selected: report
                        .selections
                        .iter()
                        .map(|r| r.instance_id.clone())
                        .collect(),
                    labeled_after: report.labeled_after,
                }
            }
        };
        rounds.push(summary);
    }

    // final evaluation on the held-out split, through the real evaluator
    let test_refs: Vec<&SyntheticInstance> = dataset.test.iter().collect();
    let test_preds = detector_predict(&adapter.state, config, &test_refs)?;
    let test_gts: Vec<GroundTruthInstance> =
        dataset.test.iter().map(SyntheticInstance::ground_truth).collect();
    let (per_category_ap, map50) = mean_average_precision(&test_preds, &test_gts, MAP50_IOU)?;

    let mut category_counts: BTreeMap<u32, u64> =
        (0..config.categories).map(|c| (c, 0)).collect();
    for id in pool.labeled() {
        let inst = dataset
            .instance(id)
            .ok_or_else(|| Error::contract(format!("unknown labeled id `{id}`")))?;
        *category_counts.get_mut(&inst.category).unwrap() += 1;
    }
    let counts: Vec<u64> = category_counts.values().copied().collect();

    Ok(SeedOutcome {
        seed,
        map50,
        per_category_ap,
        rounds,
        final_labeled: pool.labeled().len(),
        category_counts,
        gini_labeled: gini(&counts),
    })
}

/// Runs a strategy over a list of seeds and aggregates the mAP50 proxy.
pub fn run_experiment(
    strategy: Strategy,
    seeds: &[u64],
    config: &SimConfig,
) -> Result<ExperimentReport> {
    if seeds.is_empty() {
        return Err(Error::invalid("need at least one seed"));
    }
    config.validate()?;
    let per_seed: Vec<SeedOutcome> =
        seeds.iter().map(|&s| run_seed(strategy, config, s)).collect::<Result<_>>()?;
    let maps: Vec<f64> = per_seed.iter().map(|o| o.map50).collect();
    let mean = maps.iter().sum::<f64>() / maps.len() as f64;
    let var = maps.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / maps.len() as f64;
    Ok(ExperimentReport {
        strategy,
        config: config.clone(),
        seeds: seeds.to_vec(),
        per_seed,
        mean_map50: mean,
        var_map50: var,
    })
}
