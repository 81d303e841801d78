//! Model-state observation: prediction/ground-truth matching, per-category
//! average precision, the four ability dimensions, the softmax weighting they
//! induce over scoring dimensions, and the state-interpolated final score.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::diversity::FeatureVector;
use crate::error::{Error, Result};
use crate::geometry::{riou, RotatedBox};
use crate::scalar::Real;
use crate::uncertainty::CategoryDistribution;

/// IoU threshold of the mAP50 evaluation protocol.
pub const MAP50_IOU: f64 = 0.5;

/// An annotated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthInstance {
    pub image_id: String,
    pub instance_id: String,
    pub category_id: u32,
    pub r#box: RotatedBox,
}

/// One detector output: box, category distribution, embedding, and the
/// detector's own localization/orientation uncertainty estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct InstancePrediction {
    pub image_id: String,
    /// Link to a ground-truth/candidate identity, when known.
    pub instance_id: Option<String>,
    pub r#box: RotatedBox,
    pub probs: CategoryDistribution,
    pub feature: FeatureVector,
    pub pred_loc_unc: f64,
}

impl InstancePrediction {
    pub fn new(
        image_id: String,
        instance_id: Option<String>,
        r#box: RotatedBox,
        probs: CategoryDistribution,
        feature: FeatureVector,
        pred_loc_unc: f64,
    ) -> Result<Self> {
        if !pred_loc_unc.is_finite() || !(0.0..=1.0).contains(&pred_loc_unc) {
            return Err(Error::invalid("pred_loc_unc must lie in [0, 1]"));
        }
        Ok(Self { image_id, instance_id, r#box, probs, feature, pred_loc_unc })
    }

    /// Highest category probability.
    pub fn confidence(&self) -> f64 {
        self.probs.confidence()
    }

    /// Argmax category, standing in for the unknown true label.
    pub fn pseudo_category(&self) -> u32 {
        self.probs.argmax() as u32
    }
}

/// One matched prediction/ground-truth pair (indices into the input slices).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub pred: usize,
    pub gt: usize,
    pub riou: f64,
}

/// Greedy one-to-one matching: predictions in confidence-descending order
/// each take the unmatched ground truth of the same image with the highest
/// RIoU at or above the threshold (same category when `class_aware`). Ties
/// break by instance id, then input order.
pub fn match_predictions(
    preds: &[InstancePrediction],
    gts: &[GroundTruthInstance],
    iou_threshold: f64,
    class_aware: bool,
) -> Vec<MatchPair> {
    let mut gts_by_image: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, gt) in gts.iter().enumerate() {
        gts_by_image.entry(gt.image_id.as_str()).or_default().push(i);
    }

    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .confidence()
            .partial_cmp(&preds[a].confidence())
            .unwrap()
            .then_with(|| preds[a].instance_id.cmp(&preds[b].instance_id))
            .then_with(|| a.cmp(&b))
    });

    let mut gt_taken = vec![false; gts.len()];
    let mut matches = Vec::new();
    for p in order {
        let pred = &preds[p];
        let Some(candidates) = gts_by_image.get(pred.image_id.as_str()) else {
            continue;
        };
        let mut best: Option<(f64, usize)> = None;
        for &g in candidates {
            if gt_taken[g] {
                continue;
            }
            let gt = &gts[g];
            if class_aware && gt.category_id != pred.pseudo_category() {
                continue;
            }
            let iou = riou(&pred.r#box, &gt.r#box);
            if iou < iou_threshold {
                continue;
            }
            let better = match best {
                None => true,
                Some((best_iou, best_g)) => {
                    iou > best_iou
                        || (iou == best_iou
                            && gts[g].instance_id < gts[best_g].instance_id)
                }
            };
            if better {
                best = Some((iou, g));
            }
        }
        if let Some((iou, g)) = best {
            gt_taken[g] = true;
            matches.push(MatchPair { pred: p, gt: g, riou: iou });
        }
    }
    matches
}

/// All-point interpolated average precision from a ranked true-positive flag
/// sequence (highest confidence first) and the ground-truth count.
pub fn ap_from_ranked(tp: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut points = Vec::with_capacity(tp.len());
    let (mut acc_tp, mut acc_fp) = (0usize, 0usize);
    for &is_tp in tp {
        if is_tp {
            acc_tp += 1;
        } else {
            acc_fp += 1;
        }
        let precision = acc_tp as f64 / (acc_tp + acc_fp) as f64;
        let recall = acc_tp as f64 / num_gt as f64;
        points.push((recall, precision));
    }
    // precision envelope, integrated over recall
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for i in 0..points.len() {
        let (recall, _) = points[i];
        if recall > prev_recall {
            let max_precision = points[i..]
                .iter()
                .map(|&(_, p)| p)
                .fold(0.0, f64::max);
            ap += (recall - prev_recall) * max_precision;
            prev_recall = recall;
        }
    }
    ap
}

/// Average precision of one category at the given RIoU threshold, or `None`
/// when the category has no ground truth (undefined, excluded from means).
pub fn average_precision(
    preds: &[InstancePrediction],
    gts: &[GroundTruthInstance],
    category: u32,
    iou_threshold: f64,
) -> Option<f64> {
    let cat_gts: Vec<GroundTruthInstance> =
        gts.iter().filter(|g| g.category_id == category).cloned().collect();
    if cat_gts.is_empty() {
        return None;
    }
    let mut cat_preds: Vec<InstancePrediction> =
        preds.iter().filter(|p| p.pseudo_category() == category).cloned().collect();
    cat_preds.sort_by(|a, b| {
        b.confidence()
            .partial_cmp(&a.confidence())
            .unwrap()
            .then_with(|| a.instance_id.cmp(&b.instance_id))
    });
    let matches = match_predictions(&cat_preds, &cat_gts, iou_threshold, true);
    let matched: BTreeSet<usize> = matches.iter().map(|m| m.pred).collect();
    let tp: Vec<bool> = (0..cat_preds.len()).map(|i| matched.contains(&i)).collect();
    Some(ap_from_ranked(&tp, cat_gts.len()))
}

/// Per-category AP (categories present in the ground truth) and their mean.
pub fn mean_average_precision(
    preds: &[InstancePrediction],
    gts: &[GroundTruthInstance],
    iou_threshold: f64,
) -> Result<(BTreeMap<u32, f64>, f64)> {
    if gts.is_empty() {
        return Err(Error::invalid("mAP is undefined without ground truth"));
    }
    let categories: BTreeSet<u32> = gts.iter().map(|g| g.category_id).collect();
    let mut per_category = BTreeMap::new();
    for c in categories {
        if let Some(ap) = average_precision(preds, gts, c, iou_threshold) {
            per_category.insert(c, ap);
        }
    }
    let map = per_category.values().sum::<f64>() / per_category.len() as f64;
    Ok((per_category, map))
}

/// How rare-category APs aggregate into the inter-category ability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterAggregate {
    /// Mean of rare-category APs (bounded, the default).
    Mean,
    /// Sum of rare-category APs, clamped to one.
    Sum,
}

/// Knobs of the ability observation.
#[derive(Debug, Clone, Copy)]
pub struct AbilityOptions {
    /// Categories at or below this quantile of labeled counts are rare.
    pub rare_quantile: f64,
    pub inter_aggregate: InterAggregate,
    pub iou_threshold: f64,
}

impl Default for AbilityOptions {
    fn default() -> Self {
        Self {
            rare_quantile: 1.0 / 3.0,
            inter_aggregate: InterAggregate::Mean,
            iou_threshold: MAP50_IOU,
        }
    }
}

/// The four observed model-state dimensions, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbilityVector {
    a_cls: f64,
    a_loc: f64,
    a_inter: f64,
    a_intra: f64,
}

impl AbilityVector {
    pub fn new(a_cls: f64, a_loc: f64, a_inter: f64, a_intra: f64) -> Result<Self> {
        for (name, v) in
            [("a_cls", a_cls), ("a_loc", a_loc), ("a_inter", a_inter), ("a_intra", a_intra)]
        {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(Self { a_cls, a_loc, a_inter, a_intra })
    }

    pub fn a_cls(&self) -> f64 {
        self.a_cls
    }

    pub fn a_loc(&self) -> f64 {
        self.a_loc
    }

    pub fn a_inter(&self) -> f64 {
        self.a_inter
    }

    pub fn a_intra(&self) -> f64 {
        self.a_intra
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.a_cls, self.a_loc, self.a_inter, self.a_intra]
    }

    /// Mean of the four dimensions.
    pub fn a_bar(&self) -> f64 {
        (self.a_cls + self.a_loc + self.a_inter + self.a_intra) / 4.0
    }

    /// The softmax weights this state induces over scoring dimensions.
    pub fn weights(&self) -> [f64; 4] {
        mso_weights(self.as_array())
    }
}

/// An ability observation with its derived weights and the rare-category set
/// it was computed against.
#[derive(Debug, Clone, PartialEq)]
pub struct AbilityReport {
    pub ability: AbilityVector,
    pub weights: [f64; 4],
    pub rare_categories: Vec<u32>,
    pub per_category_ap: BTreeMap<u32, f64>,
}

/// Categories whose labeled count sits at or below the `quantile` rank of the
/// per-category counts. At least one category is always returned.
pub fn rare_categories(counts: &BTreeMap<u32, u64>, quantile: f64) -> Vec<u32> {
    if counts.is_empty() {
        return Vec::new();
    }
    let mut sorted: Vec<u64> = counts.values().copied().collect();
    sorted.sort_unstable();
    let idx = ((sorted.len() - 1) as f64 * quantile.clamp(0.0, 1.0)).floor() as usize;
    let threshold = sorted[idx];
    counts.iter().filter(|(_, &n)| n <= threshold).map(|(&c, _)| c).collect()
}

/// Observes the model state on an evaluation set.
///
/// The rarity universe is the union of the labeled-count keys and the
/// categories present in the evaluation ground truth (absent counts are zero).
pub fn observe_ability(
    eval_preds: &[InstancePrediction],
    eval_gts: &[GroundTruthInstance],
    labeled_counts: &BTreeMap<u32, u64>,
    opts: &AbilityOptions,
) -> Result<AbilityReport> {
    if eval_gts.is_empty() {
        return Err(Error::invalid("ability observation needs a non-empty evaluation set"));
    }
    let present: BTreeSet<u32> = eval_gts.iter().map(|g| g.category_id).collect();

    let mut per_category_ap = BTreeMap::new();
    for &c in &present {
        if let Some(ap) = average_precision(eval_preds, eval_gts, c, opts.iou_threshold) {
            per_category_ap.insert(c, ap);
        }
    }
    let a_cls = per_category_ap.values().sum::<f64>() / per_category_ap.len() as f64;

    // localization: class-agnostic, threshold-free greedy assignment by
    // descending RIoU; unmatched ground truth scores zero
    let a_loc = mean_matched_iou(eval_preds, eval_gts);

    // rarity universe: known counts plus categories observed in the eval set
    let mut counts = labeled_counts.clone();
    for &c in &present {
        counts.entry(c).or_insert(0);
    }
    let rare = rare_categories(&counts, opts.rare_quantile);
    let rare_present: Vec<f64> = rare
        .iter()
        .filter_map(|c| per_category_ap.get(c).copied())
        .collect();
    let a_inter = if rare_present.is_empty() {
        0.0
    } else {
        match opts.inter_aggregate {
            InterAggregate::Mean => rare_present.iter().sum::<f64>() / rare_present.len() as f64,
            InterAggregate::Sum => rare_present.iter().sum::<f64>().min(1.0),
        }
    };

    let a_intra = intra_ability(eval_preds, eval_gts, &present, opts.iou_threshold);

    let ability = AbilityVector::new(a_cls, a_loc, a_inter, a_intra)?;
    let weights = ability.weights();
    Ok(AbilityReport { ability, weights, rare_categories: rare, per_category_ap })
}

/// The four ability dimensions alone; see [`observe_ability`].
pub fn ability_vector(
    eval_preds: &[InstancePrediction],
    eval_gts: &[GroundTruthInstance],
    labeled_counts: &BTreeMap<u32, u64>,
    opts: &AbilityOptions,
) -> Result<AbilityVector> {
    observe_ability(eval_preds, eval_gts, labeled_counts, opts).map(|r| r.ability)
}

/// Mean over ground truths of the RIoU of their class-agnostic,
/// threshold-free greedy best match (unmatched ground truth scores zero).
pub fn mean_matched_iou(preds: &[InstancePrediction], gts: &[GroundTruthInstance]) -> f64 {
    if gts.is_empty() {
        return 0.0;
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    let mut preds_by_image: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in preds.iter().enumerate() {
        preds_by_image.entry(p.image_id.as_str()).or_default().push(i);
    }
    for (g, gt) in gts.iter().enumerate() {
        if let Some(ps) = preds_by_image.get(gt.image_id.as_str()) {
            for &p in ps {
                let iou = riou(&preds[p].r#box, &gt.r#box);
                if iou > 0.0 {
                    pairs.push((iou, g, p));
                }
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then_with(|| gts[a.1].instance_id.cmp(&gts[b.1].instance_id))
            .then_with(|| preds[a.2].instance_id.cmp(&preds[b.2].instance_id))
            .then_with(|| a.2.cmp(&b.2))
    });
    let mut gt_taken = vec![false; gts.len()];
    let mut pred_taken = vec![false; preds.len()];
    let mut total = 0.0;
    for (iou, g, p) in pairs {
        if gt_taken[g] || pred_taken[p] {
            continue;
        }
        gt_taken[g] = true;
        pred_taken[p] = true;
        total += iou;
    }
    total / gts.len() as f64
}

fn intra_ability(
    preds: &[InstancePrediction],
    gts: &[GroundTruthInstance],
    present: &BTreeSet<u32>,
    iou_threshold: f64,
) -> f64 {
    if present.is_empty() {
        return 0.0;
    }
    let matches = match_predictions(preds, gts, iou_threshold, false);
    let mut per_cat: BTreeMap<u32, Vec<(bool, f64)>> = BTreeMap::new();
    for m in &matches {
        let gt = &gts[m.gt];
        let pred = &preds[m.pred];
        per_cat
            .entry(gt.category_id)
            .or_default()
            .push((pred.pseudo_category() == gt.category_id, pred.confidence()));
    }
    let mut total = 0.0;
    for (_, entries) in per_cat {
        let n = entries.len() as f64;
        let acc = entries.iter().filter(|(ok, _)| *ok).count() as f64 / n;
        let mean = entries.iter().map(|(_, c)| c).sum::<f64>() / n;
        let var = entries.iter().map(|(_, c)| (c - mean).powi(2)).sum::<f64>() / n;
        total += acc * (-var).exp();
    }
    total / present.len() as f64
}

/// Softmax weights `e^(1 - A_i) / sum_j e^(1 - A_j)`: the weaker a dimension,
/// the more weight its uncertainty receives.
pub fn mso_weights<S: Real>(abilities: [S; 4]) -> [S; 4] {
    let exps = abilities.map(|a| (S::one() - a).exp());
    let sum = exps.iter().fold(S::zero(), |acc, e| acc + *e);
    exps.map(|e| e / sum)
}

/// Ability-weighted sum of the four normalized scoring dimensions, in `[0, 1]`.
pub fn composite_score<S: Real>(u: [S; 4], abilities: [S; 4]) -> Result<S> {
    for v in u {
        if !v.is_finite() || v < S::zero() || v > S::one() {
            return Err(Error::invalid("scoring dimensions must lie in [0, 1]"));
        }
    }
    let w = mso_weights(abilities);
    Ok(u.iter().zip(w.iter()).fold(S::zero(), |acc, (u, w)| acc + *u * *w))
}

/// State interpolation `a_bar * S + (1 - a_bar) * (1 - S)`: strong models
/// chase hard samples, weak models easy ones, and `a_bar = 1/2` is neutral.
pub fn final_score<S: Real>(s: S, a_bar: S) -> S {
    a_bar * s + (S::one() - a_bar) * (S::one() - s)
}

/// Wire form of an ability observation, as written to `ability.json` and
/// embedded in round states and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbilitySnapshot {
    pub a_cls: f64,
    pub a_loc: f64,
    pub a_inter: f64,
    pub a_intra: f64,
    pub a_bar: f64,
    pub weights: [f64; 4],
    pub rare_categories: Vec<u32>,
}

impl From<&AbilityReport> for AbilitySnapshot {
    fn from(report: &AbilityReport) -> Self {
        Self {
            a_cls: report.ability.a_cls(),
            a_loc: report.ability.a_loc(),
            a_inter: report.ability.a_inter(),
            a_intra: report.ability.a_intra(),
            a_bar: report.ability.a_bar(),
            weights: report.weights,
            rare_categories: report.rare_categories.clone(),
        }
    }
}

impl AbilitySnapshot {
    pub fn to_vector(&self) -> Result<AbilityVector> {
        AbilityVector::new(self.a_cls, self.a_loc, self.a_inter, self.a_intra)
    }
}

/// The per-candidate scoring record: the four normalized dimensions, the
/// weights in force, and the composite and final scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBreakdown {
    pub u_cls_norm: f64,
    pub u_loc_theta: f64,
    pub d_inter: f64,
    pub d_intra_norm: f64,
    pub weights: [f64; 4],
    pub s: f64,
    pub s_final: f64,
    pub pseudo_category: u32,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> RotatedBox {
        RotatedBox::new(cx, cy, w, h, theta).unwrap()
    }

    fn gt(image: &str, id: &str, category: u32, b: RotatedBox) -> GroundTruthInstance {
        GroundTruthInstance {
            image_id: image.to_string(),
            instance_id: id.to_string(),
            category_id: category,
            r#box: b,
        }
    }

    fn pred(image: &str, id: &str, b: RotatedBox, probs: Vec<f64>) -> InstancePrediction {
        InstancePrediction::new(
            image.to_string(),
            Some(id.to_string()),
            b,
            CategoryDistribution::new(probs).unwrap(),
            FeatureVector::new(vec![1.0, 0.0]).unwrap(),
            0.0,
        )
        .unwrap()
    }

    fn probs_for(category: usize, confidence: f64, c: usize) -> Vec<f64> {
        let rest = (1.0 - confidence) / (c - 1) as f64;
        (0..c).map(|i| if i == category { confidence } else { rest }).collect()
    }

    #[test]
    fn matching_basic() {
        let gts = vec![gt("img", "g0", 0, bx(0.0, 0.0, 2.0, 2.0, 0.0))];
        let preds = vec![pred("img", "p0", bx(0.0, 0.0, 2.0, 2.0, 0.0), probs_for(0, 0.9, 3))];
        let m = match_predictions(&preds, &gts, 0.5, true);
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].pred, m[0].gt), (0, 0));
        assert!((m[0].riou - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matching_is_one_to_one_by_confidence() {
        let gts = vec![gt("img", "g0", 0, bx(0.0, 0.0, 2.0, 2.0, 0.0))];
        let preds = vec![
            pred("img", "p0", bx(0.1, 0.0, 2.0, 2.0, 0.0), probs_for(0, 0.6, 3)),
            pred("img", "p1", bx(0.0, 0.0, 2.0, 2.0, 0.0), probs_for(0, 0.9, 3)),
        ];
        let m = match_predictions(&preds, &gts, 0.5, true);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].pred, 1);
    }

    #[test]
    fn matching_respects_images_and_classes() {
        let gts = vec![gt("a", "g0", 0, bx(0.0, 0.0, 2.0, 2.0, 0.0))];
        let other_image = vec![pred("b", "p0", bx(0.0, 0.0, 2.0, 2.0, 0.0), probs_for(0, 0.9, 3))];
        assert!(match_predictions(&other_image, &gts, 0.5, true).is_empty());
        let other_class = vec![pred("a", "p0", bx(0.0, 0.0, 2.0, 2.0, 0.0), probs_for(1, 0.9, 3))];
        assert!(match_predictions(&other_class, &gts, 0.5, true).is_empty());
        assert_eq!(match_predictions(&other_class, &gts, 0.5, false).len(), 1);
    }

    #[test]
    fn matching_agrees_with_brute_force_on_fixture() {
        let gts = vec![
            gt("img", "g0", 0, bx(0.0, 0.0, 2.0, 2.0, 0.0)),
            gt("img", "g1", 0, bx(5.0, 0.0, 2.0, 2.0, 0.0)),
        ];
        let preds = vec![
            pred("img", "p0", bx(0.2, 0.0, 2.0, 2.0, 0.0), probs_for(0, 0.9, 3)),
            pred("img", "p1", bx(5.3, 0.0, 2.0, 2.0, 0.0), probs_for(0, 0.8, 3)),
            pred("img", "p2", bx(0.9, 0.0, 2.0, 2.0, 0.0), probs_for(0, 0.7, 3)),
        ];
        let m = match_predictions(&preds, &gts, 0.3, true);

        // brute force over all one-to-one assignments, maximizing matched
        // count then total RIoU
        type Assignment = Vec<(usize, usize)>;
        let mut best: Option<(usize, f64, Assignment)> = None;
        for assignment in [
            vec![(0usize, 0usize), (1, 1)],
            vec![(0, 1), (1, 0)],
            vec![(0, 0), (2, 1)],
            vec![(0, 1), (2, 0)],
            vec![(1, 0), (2, 1)],
            vec![(1, 1), (2, 0)],
            vec![(0, 0)],
            vec![(1, 1)],
        ] {
            let mut total = 0.0;
            let mut count = 0usize;
            let mut ok = true;
            for &(p, g) in &assignment {
                let iou = riou(&preds[p].r#box, &gts[g].r#box);
                if iou < 0.3 {
                    ok = false;
                    break;
                }
                total += iou;
                count += 1;
            }
            if ok {
                let better = match &best {
                    None => true,
                    Some((c, t, _)) => count > *c || (count == *c && total > *t),
                };
                if better {
                    best = Some((count, total, assignment));
                }
            }
        }
        let best = best.unwrap().2;
        let got: Vec<(usize, usize)> = m.iter().map(|m| (m.pred, m.gt)).collect();
        assert_eq!(got.len(), best.len());
        for pair in best {
            assert!(got.contains(&pair));
        }
    }

    #[test]
    fn ap_fixtures() {
        // perfect detector over three ground truths
        let gts: Vec<_> = (0..3)
            .map(|i| gt("img", &format!("g{i}"), 1, bx(i as f64 * 10.0, 0.0, 2.0, 2.0, 0.0)))
            .collect();
        let preds: Vec<_> = (0..3)
            .map(|i| {
                pred(
                    "img",
                    &format!("p{i}"),
                    bx(i as f64 * 10.0, 0.0, 2.0, 2.0, 0.0),
                    probs_for(1, 0.9, 3),
                )
            })
            .collect();
        assert!((average_precision(&preds, &gts, 1, 0.5).unwrap() - 1.0).abs() < 1e-12);

        // no predictions
        assert_eq!(average_precision(&[], &gts, 1, 0.5).unwrap(), 0.0);

        // category absent from ground truth is undefined
        assert!(average_precision(&preds, &gts, 2, 0.5).is_none());
    }

    #[test]
    fn ap_hand_computed_pr_curve() {
        // 2 GT; ranked detections TP(0.9), FP(0.8), TP(0.7)
        // AP = 1 * 0.5 + (2/3) * 0.5 = 0.8333...
        let gts = vec![
            gt("img", "g0", 0, bx(0.0, 0.0, 2.0, 2.0, 0.0)),
            gt("img", "g1", 0, bx(10.0, 0.0, 2.0, 2.0, 0.0)),
        ];
        let preds = vec![
            pred("img", "p0", bx(0.0, 0.0, 2.0, 2.0, 0.0), probs_for(0, 0.9, 3)),
            pred("img", "p1", bx(50.0, 0.0, 2.0, 2.0, 0.0), probs_for(0, 0.8, 3)),
            pred("img", "p2", bx(10.0, 0.0, 2.0, 2.0, 0.0), probs_for(0, 0.7, 3)),
        ];
        let ap = average_precision(&preds, &gts, 0, 0.5).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
        assert!((ap - 0.8333).abs() < 1e-4);
    }

    #[test]
    fn ap_from_ranked_is_order_only() {
        let tp = [true, false, true, false];
        let base = ap_from_ranked(&tp, 3);
        assert!(base > 0.0 && base < 1.0);
        assert_eq!(ap_from_ranked(&[], 3), 0.0);
        assert_eq!(ap_from_ranked(&tp, 0), 0.0);
    }

    #[test]
    fn rare_categories_always_nonempty() {
        let counts: BTreeMap<u32, u64> = [(0, 100), (1, 3), (2, 50)].into_iter().collect();
        let rare = rare_categories(&counts, 1.0 / 3.0);
        assert_eq!(rare, vec![1]);
        let uniform: BTreeMap<u32, u64> = [(0, 5), (1, 5)].into_iter().collect();
        assert_eq!(rare_categories(&uniform, 1.0 / 3.0).len(), 2);
        assert!(rare_categories(&BTreeMap::new(), 0.5).is_empty());
    }

    #[test]
    fn ability_perfect_detector() {
        let categories = 3u32;
        let mut gts = Vec::new();
        let mut preds = Vec::new();
        for c in 0..categories {
            for i in 0..3 {
                let b = bx(f64::from(c) * 30.0 + f64::from(i) * 10.0, 0.0, 4.0, 2.0, 0.3);
                gts.push(gt("img", &format!("g{c}_{i}"), c, b));
                let mut probs = vec![0.0; categories as usize];
                probs[c as usize] = 1.0;
                preds.push(pred("img", &format!("p{c}_{i}"), b, probs));
            }
        }
        let counts: BTreeMap<u32, u64> = (0..categories).map(|c| (c, 3)).collect();
        let report =
            observe_ability(&preds, &gts, &counts, &AbilityOptions::default()).unwrap();
        let a = report.ability;
        assert!((a.a_cls() - 1.0).abs() < 1e-9);
        assert!((a.a_loc() - 1.0).abs() < 1e-9);
        assert!((a.a_inter() - 1.0).abs() < 1e-9);
        assert!((a.a_intra() - 1.0).abs() < 1e-9);
        assert!((a.a_bar() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ability_no_predictions() {
        let gts = vec![gt("img", "g0", 0, bx(0.0, 0.0, 2.0, 2.0, 0.0))];
        let counts: BTreeMap<u32, u64> = [(0, 1)].into_iter().collect();
        let a = ability_vector(&[], &gts, &counts, &AbilityOptions::default()).unwrap();
        assert_eq!(a.as_array(), [0.0; 4]);
        assert!(ability_vector(&[], &[], &counts, &AbilityOptions::default()).is_err());
    }

    #[test]
    fn ability_loc_tracks_hand_average() {
        // two ground truths, one prediction exact, one shifted to IoU 1/3
        let gts = vec![
            gt("img", "g0", 0, bx(0.0, 0.0, 2.0, 2.0, 0.0)),
            gt("img", "g1", 1, bx(10.0, 0.0, 2.0, 2.0, 0.0)),
        ];
        let preds = vec![
            pred("img", "p0", bx(0.0, 0.0, 2.0, 2.0, 0.0), probs_for(0, 0.9, 3)),
            pred("img", "p1", bx(11.0, 0.0, 2.0, 2.0, 0.0), probs_for(1, 0.8, 3)),
        ];
        let counts: BTreeMap<u32, u64> = [(0, 1), (1, 1)].into_iter().collect();
        let a = ability_vector(&preds, &gts, &counts, &AbilityOptions::default()).unwrap();
        assert!((a.a_loc() - (1.0 + 1.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn mso_weight_fixtures() {
        let equal = mso_weights([0.4_f64; 4]);
        for w in equal {
            assert!((w - 0.25).abs() < 1e-12);
        }
        let w = mso_weights([1.0_f64, 0.0, 0.5, 0.5]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((w[0] - 0.1425).abs() < 1e-4);
        assert!((w[1] - 0.3875).abs() < 1e-4);
        assert!((w[2] - 0.2350).abs() < 1e-4);
        assert!((w[3] - 0.2350).abs() < 1e-4);
        // the weakest dimension gets the largest weight
        let idx_max = (0..4).max_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap()).unwrap();
        assert_eq!(idx_max, 1);
    }

    #[test]
    fn composite_score_fixtures() {
        let a = [1.0_f64, 0.0, 0.5, 0.5];
        assert_eq!(composite_score([0.0; 4], a).unwrap(), 0.0);
        assert!((composite_score([1.0; 4], a).unwrap() - 1.0).abs() < 1e-12);
        let s = composite_score([0.8, 0.2, 0.5, 0.5], a).unwrap();
        assert!((s - 0.4265).abs() < 1e-4);
        assert!(composite_score([1.2, 0.0, 0.0, 0.0], a).is_err());
    }

    #[test]
    fn final_score_regimes() {
        for s in [0.0_f64, 0.25, 0.7, 1.0] {
            assert_eq!(final_score(s, 1.0), s);
            assert_eq!(final_score(s, 0.0), 1.0 - s);
            assert!((final_score(s, 0.5) - 0.5).abs() < 1e-12);
        }
    }
}
