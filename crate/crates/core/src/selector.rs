//! Candidate scoring and the budgeted selection round: greedy argmax with
//! in-round prototype/count updates, pool bookkeeping, annotation against an
//! oracle, and the adapter contract a backing detector must satisfy.

use std::collections::{BTreeMap, BTreeSet};

use crate::config::{MsoEval, RunConfig, SelectionMode};
use crate::diversity::PrototypeStore;
use crate::error::{Error, Result};
use crate::observation::{
    composite_score, final_score, observe_ability, AbilityOptions, AbilityReport, AbilityVector,
    GroundTruthInstance, InstancePrediction, ScoreBreakdown,
};
use crate::uncertainty::normalized_classification_uncertainty;

pub type InstanceId = String;

/// Disjoint labeled/unlabeled partition of the dataset, with the round
/// counter. Ids only ever move from unlabeled to labeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelPool {
    labeled: BTreeSet<InstanceId>,
    unlabeled: BTreeSet<InstanceId>,
    round: u32,
}

impl LabelPool {
    pub fn new(labeled: BTreeSet<InstanceId>, unlabeled: BTreeSet<InstanceId>) -> Result<Self> {
        Self::from_parts(labeled, unlabeled, 0)
    }

    pub fn from_parts(
        labeled: BTreeSet<InstanceId>,
        unlabeled: BTreeSet<InstanceId>,
        round: u32,
    ) -> Result<Self> {
        if let Some(id) = labeled.intersection(&unlabeled).next() {
            return Err(Error::invalid(format!(
                "instance `{id}` is both labeled and unlabeled"
            )));
        }
        Ok(Self { labeled, unlabeled, round })
    }

    pub fn labeled(&self) -> &BTreeSet<InstanceId> {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &BTreeSet<InstanceId> {
        &self.unlabeled
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn advance_round(&mut self) {
        self.round += 1;
    }

    pub(crate) fn mark_labeled(&mut self, id: &str) -> Result<()> {
        if !self.unlabeled.remove(id) {
            return Err(Error::invalid(format!("instance `{id}` is not unlabeled")));
        }
        self.labeled.insert(id.to_string());
        Ok(())
    }
}

/// One pick, with the scores as they stood at pick time.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRecord {
    pub instance_id: InstanceId,
    /// 1-based pick order.
    pub rank: u32,
    pub breakdown: ScoreBreakdown,
}

/// Scores one unlabeled candidate against the current store and the ability
/// observed this round.
///
/// The localization/orientation dimension is the detector's own prediction
/// (`pred_loc_unc`): the ground-truth-based fused target is unavailable for
/// unlabeled instances. Diversity terms use the argmax pseudo-category.
pub fn score_candidate(
    pred: &InstancePrediction,
    store: &PrototypeStore,
    ability: &AbilityVector,
) -> Result<ScoreBreakdown> {
    let u_cls_norm = normalized_classification_uncertainty(&pred.probs);
    let u_loc_theta = pred.pred_loc_unc;
    let pseudo_category = pred.pseudo_category();
    let d_inter = store.inter_diversity(pseudo_category);
    let d_intra_norm = store.intra_diversity_normalized(pseudo_category, &pred.feature)?;
    let abilities = ability.as_array();
    let u = [u_cls_norm, u_loc_theta, d_inter, d_intra_norm];
    let s = composite_score(u, abilities)?;
    let s_final = final_score(s, ability.a_bar());
    Ok(ScoreBreakdown {
        u_cls_norm,
        u_loc_theta,
        d_inter,
        d_intra_norm,
        weights: ability.weights(),
        s,
        s_final,
        pseudo_category,
    })
}

/// Scores every candidate against a fixed store snapshot.
pub fn score_all(
    candidates: &[InstancePrediction],
    store: &PrototypeStore,
    ability: &AbilityVector,
) -> Result<Vec<ScoreBreakdown>> {
    candidates.iter().map(|c| score_candidate(c, store, ability)).collect()
}

/// `true` when candidate `a` is picked over `b`: higher final score, then
/// higher composite score, then smaller instance id.
fn prefer(a: (&ScoreBreakdown, &str), b: (&ScoreBreakdown, &str)) -> bool {
    if a.0.s_final != b.0.s_final {
        return a.0.s_final > b.0.s_final;
    }
    if a.0.s != b.0.s {
        return a.0.s > b.0.s;
    }
    a.1 < b.1
}

fn candidate_ids(candidates: &[InstancePrediction]) -> Result<Vec<&str>> {
    let mut ids = Vec::with_capacity(candidates.len());
    let mut seen = BTreeSet::new();
    for c in candidates {
        let id = c
            .instance_id
            .as_deref()
            .ok_or_else(|| Error::invalid("selection candidates must carry instance ids"))?;
        if !seen.insert(id) {
            return Err(Error::invalid(format!("duplicate candidate instance id `{id}`")));
        }
        ids.push(id);
    }
    Ok(ids)
}

fn check_budget(budget: usize, candidates: &[InstancePrediction]) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::invalid("selection over an empty candidate set"));
    }
    if budget == 0 || budget > candidates.len() {
        return Err(Error::invalid(format!(
            "budget {budget} outside 1..={}",
            candidates.len()
        )));
    }
    Ok(())
}

/// Budgeted greedy selection: repeatedly picks the best-scored candidate,
/// applies the EMA prototype update and count increment under its
/// pseudo-category, and rescores only the remaining candidates of that
/// category (other breakdowns cannot change). The ability vector is held
/// fixed for the whole round.
pub fn greedy_select(
    candidates: &[InstancePrediction],
    store: &mut PrototypeStore,
    ability: &AbilityVector,
    budget: usize,
) -> Result<Vec<SelectionRecord>> {
    check_budget(budget, candidates)?;
    let ids = candidate_ids(candidates)?;
    let mut breakdowns = score_all(candidates, store, ability)?;
    let mut remaining: Vec<usize> = (0..candidates.len()).collect();
    let mut records = Vec::with_capacity(budget);

    for rank in 1..=budget as u32 {
        let mut best_pos = 0;
        for pos in 1..remaining.len() {
            let (i, j) = (remaining[pos], remaining[best_pos]);
            if prefer((&breakdowns[i], ids[i]), (&breakdowns[j], ids[j])) {
                best_pos = pos;
            }
        }
        let picked = remaining.swap_remove(best_pos);
        let breakdown = breakdowns[picked].clone();
        let category = breakdown.pseudo_category;
        store.update_prototype(category, &candidates[picked].feature)?;
        for &i in &remaining {
            if breakdowns[i].pseudo_category == category {
                breakdowns[i] = score_candidate(&candidates[i], store, ability)?;
            }
        }
        records.push(SelectionRecord {
            instance_id: ids[picked].to_string(),
            rank,
            breakdown,
        });
    }
    Ok(records)
}

/// One-shot top-K by the initial scores, without in-round rescoring. The
/// prototype/count updates are applied after ranking, in pick order, so the
/// store leaves the round in the same bookkeeping state as the greedy mode.
pub fn static_top_k(
    candidates: &[InstancePrediction],
    store: &mut PrototypeStore,
    ability: &AbilityVector,
    budget: usize,
) -> Result<Vec<SelectionRecord>> {
    check_budget(budget, candidates)?;
    let ids = candidate_ids(candidates)?;
    let breakdowns = score_all(candidates, store, ability)?;
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        if prefer((&breakdowns[a], ids[a]), (&breakdowns[b], ids[b])) {
            std::cmp::Ordering::Less
        } else {
            std::cmp::Ordering::Greater
        }
    });
    let mut records = Vec::with_capacity(budget);
    for (rank, &i) in order.iter().take(budget).enumerate() {
        store.update_prototype(breakdowns[i].pseudo_category, &candidates[i].feature)?;
        records.push(SelectionRecord {
            instance_id: ids[i].to_string(),
            rank: rank as u32 + 1,
            breakdown: breakdowns[i].clone(),
        });
    }
    Ok(records)
}

/// Dispatches on the configured selection mode.
pub fn select(
    mode: SelectionMode,
    candidates: &[InstancePrediction],
    store: &mut PrototypeStore,
    ability: &AbilityVector,
    budget: usize,
) -> Result<Vec<SelectionRecord>> {
    match mode {
        SelectionMode::Greedy => greedy_select(candidates, store, ability, budget),
        SelectionMode::Static => static_top_k(candidates, store, ability, budget),
    }
}

/// The annotation outcome of one pick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelDelta {
    pub instance_id: InstanceId,
    pub pseudo_category: u32,
    pub true_category: u32,
}

/// Moves the picked ids into the labeled set and replaces pseudo-categories
/// with the oracle's true categories in the counts (one decrement, one
/// increment per mismatch). EMA prototypes are kept as-is.
pub fn annotate(
    pool: &mut LabelPool,
    selections: &[SelectionRecord],
    store: &mut PrototypeStore,
    oracle: impl Fn(&str) -> Option<GroundTruthInstance>,
) -> Result<Vec<LabelDelta>> {
    let mut deltas = Vec::with_capacity(selections.len());
    for record in selections {
        pool.mark_labeled(&record.instance_id)?;
        let gt = oracle(&record.instance_id).ok_or_else(|| {
            Error::contract(format!(
                "annotation oracle has no label for `{}`",
                record.instance_id
            ))
        })?;
        let pseudo = record.breakdown.pseudo_category;
        if gt.category_id != pseudo {
            store.reassign_count(pseudo, gt.category_id)?;
        }
        deltas.push(LabelDelta {
            instance_id: record.instance_id.clone(),
            pseudo_category: pseudo,
            true_category: gt.category_id,
        });
    }
    Ok(deltas)
}

/// Moves picked ids into the labeled set keeping their pseudo-categories,
/// for pipelines where true labels arrive out of band.
pub fn commit_selections(pool: &mut LabelPool, selections: &[SelectionRecord]) -> Result<()> {
    for record in selections {
        pool.mark_labeled(&record.instance_id)?;
    }
    Ok(())
}

/// The behavioural contract of a backing detector.
///
/// Predictions must be deterministic given `(pool, seed)`; every requested
/// instance receives exactly one prediction carrying its id.
pub trait ModelAdapter {
    /// One prediction for every unlabeled id in the pool.
    fn predict_unlabeled(&mut self, pool: &LabelPool) -> Result<Vec<InstancePrediction>>;

    /// Predictions on the given evaluation instances.
    fn predict_eval(&mut self, eval_ids: &BTreeSet<InstanceId>) -> Result<Vec<InstancePrediction>>;

    /// Ground-truth lookup: the annotation oracle and evaluation label source.
    fn ground_truth(&self, id: &str) -> Option<GroundTruthInstance>;

    /// Invoked after annotation so the backing model can retrain.
    fn retrain(&mut self, pool: &LabelPool) -> Result<()>;
}

/// Per-loop context that round execution needs beyond the pool itself.
#[derive(Debug, Clone)]
pub struct RoundContext {
    /// The labeled set as it stood before the first round.
    pub initial_labeled: BTreeSet<InstanceId>,
    /// Evaluation ids when `mso_eval = heldout`.
    pub heldout: Option<BTreeSet<InstanceId>>,
}

/// Everything one executed round produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    /// 1-based index of the executed round.
    pub round: u32,
    pub ability: AbilityReport,
    pub selections: Vec<SelectionRecord>,
    pub deltas: Vec<LabelDelta>,
    pub labeled_after: usize,
}

/// Reports of all executed rounds, in order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoopReport {
    pub rounds: Vec<RoundReport>,
}

fn check_coverage(
    preds: &[InstancePrediction],
    expected: &BTreeSet<InstanceId>,
    what: &str,
) -> Result<()> {
    let mut seen = BTreeSet::new();
    for p in preds {
        let id = p.instance_id.as_deref().ok_or_else(|| {
            Error::contract(format!("{what} prediction without an instance id"))
        })?;
        if !expected.contains(id) {
            return Err(Error::contract(format!(
                "{what} prediction for unexpected instance `{id}`"
            )));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::contract(format!("duplicate {what} prediction for `{id}`")));
        }
    }
    if seen.len() != expected.len() {
        let missing = expected.iter().find(|id| !seen.contains(*id)).unwrap();
        return Err(Error::contract(format!("missing {what} prediction for `{missing}`")));
    }
    Ok(())
}

fn ability_options(config: &RunConfig) -> AbilityOptions {
    AbilityOptions {
        rare_quantile: config.rare_quantile,
        inter_aggregate: config.inter_aggregate.into(),
        ..AbilityOptions::default()
    }
}

/// Executes one round: observe the model state on the configured evaluation
/// set, score and select under the budget, annotate through the oracle,
/// trigger retraining, and advance the round counter.
///
/// A zero budget observes only; the pool membership stays untouched.
pub fn run_round(
    pool: &mut LabelPool,
    store: &mut PrototypeStore,
    adapter: &mut dyn ModelAdapter,
    config: &RunConfig,
    ctx: &RoundContext,
) -> Result<RoundReport> {
    config.validate()?;
    let eval_ids: BTreeSet<InstanceId> = match config.mso_eval {
        MsoEval::Initial => ctx.initial_labeled.clone(),
        MsoEval::Current => pool.labeled().clone(),
        MsoEval::Heldout => ctx
            .heldout
            .clone()
            .ok_or_else(|| Error::invalid("mso_eval=heldout requires a held-out id set"))?,
    };
    if eval_ids.is_empty() {
        return Err(Error::invalid("the model-state evaluation set is empty"));
    }
    let eval_preds = adapter.predict_eval(&eval_ids)?;
    check_coverage(&eval_preds, &eval_ids, "evaluation")?;
    let eval_gts: Vec<GroundTruthInstance> = eval_ids
        .iter()
        .map(|id| {
            adapter
                .ground_truth(id)
                .ok_or_else(|| Error::contract(format!("no ground truth for eval id `{id}`")))
        })
        .collect::<Result<_>>()?;

    let counts: BTreeMap<u32, u64> = store.entries().map(|(c, _, n)| (c, n)).collect();
    let ability = observe_ability(&eval_preds, &eval_gts, &counts, &ability_options(config))?;

    let mut selections = Vec::new();
    let mut deltas = Vec::new();
    if config.budget > 0 {
        let candidates = adapter.predict_unlabeled(pool)?;
        check_coverage(&candidates, pool.unlabeled(), "candidate")?;
        selections = select(
            config.selection,
            &candidates,
            store,
            &ability.ability,
            config.budget,
        )?;
        deltas = annotate(pool, &selections, store, |id| adapter.ground_truth(id))?;
        adapter.retrain(pool)?;
    }
    pool.advance_round();
    Ok(RoundReport {
        round: pool.round(),
        ability,
        selections,
        deltas,
        labeled_after: pool.labeled().len(),
    })
}

/// Runs `rounds` rounds, capturing the initial labeled set for the
/// `mso_eval = initial` evaluation mode.
pub fn run_loop(
    pool: &mut LabelPool,
    store: &mut PrototypeStore,
    adapter: &mut dyn ModelAdapter,
    config: &RunConfig,
    heldout: Option<BTreeSet<InstanceId>>,
) -> Result<LoopReport> {
    let ctx = RoundContext { initial_labeled: pool.labeled().clone(), heldout };
    let mut report = LoopReport::default();
    for _ in 0..config.rounds {
        report.rounds.push(run_round(pool, store, adapter, config, &ctx)?);
    }
    Ok(report)
}
