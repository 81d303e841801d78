//! Instance-level uncertainty scores: classification entropy, localization
//! uncertainty from rotated IoU, aspect-ratio-weighted fusion of localization
//! and orientation uncertainty, and the binary cross-entropy used to supervise
//! an uncertainty-prediction head.
//!
//! The fused target is computable only against known ground truth; candidate
//! scoring consumes the detector-predicted value instead (see the selector).

use crate::error::{Error, Result};
use crate::geometry::{angular_deviation, riou, RotatedBox};
use crate::scalar::Real;

/// Probabilities below this floor are treated as exact zeros in the entropy
/// sum (the `0 * ln 0 = 0` convention).
pub const PROB_FLOOR: f64 = 1e-12;

/// Distribution-sum slack accepted at construction.
pub const PROB_SUM_TOL: f64 = 1e-6;

/// Clamp applied to predicted uncertainties inside the cross-entropy loss.
pub const LOG_CLAMP: f64 = 1e-7;

/// A normalized probability vector over `C >= 2` categories.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryDistribution<S: Real = f64> {
    probs: Vec<S>,
}

impl<S: Real> CategoryDistribution<S> {
    /// Validates length, non-negativity, finiteness, and unit sum.
    pub fn new(probs: Vec<S>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::invalid("distribution needs at least two categories"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < S::zero()) {
            return Err(Error::invalid("probabilities must be finite and non-negative"));
        }
        let sum = probs.iter().fold(S::zero(), |acc, p| acc + *p);
        if (sum - S::one()).abs() > S::of(PROB_SUM_TOL) {
            return Err(Error::invalid(format!("probabilities sum to {sum:?}, expected 1")));
        }
        Ok(Self { probs })
    }

    /// Normalizes raw non-negative scores (e.g. per-category sigmoid outputs)
    /// into a distribution. All-zero score vectors are rejected.
    pub fn from_scores(scores: Vec<S>) -> Result<Self> {
        if scores.len() < 2 {
            return Err(Error::invalid("score vector needs at least two categories"));
        }
        if scores.iter().any(|p| !p.is_finite() || *p < S::zero()) {
            return Err(Error::invalid("scores must be finite and non-negative"));
        }
        let sum = scores.iter().fold(S::zero(), |acc, p| acc + *p);
        if sum < S::of(PROB_FLOOR) {
            return Err(Error::invalid("cannot normalize an all-zero score vector"));
        }
        let probs = scores.into_iter().map(|p| p / sum).collect();
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn num_categories(&self) -> usize {
        self.probs.len()
    }

    /// Index of the largest probability; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate().skip(1) {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// The largest probability.
    pub fn confidence(&self) -> S {
        self.probs[self.argmax()]
    }
}

/// Shannon entropy `-sum p ln p` of the distribution, in `[0, ln C]`.
pub fn classification_uncertainty<S: Real>(dist: &CategoryDistribution<S>) -> S {
    let floor = S::of(PROB_FLOOR);
    dist.probs()
        .iter()
        .filter(|p| **p > floor)
        .fold(S::zero(), |acc, p| acc - *p * p.ln())
}

/// Entropy divided by its maximum `ln C`, in `[0, 1]`.
pub fn normalized_classification_uncertainty<S: Real>(dist: &CategoryDistribution<S>) -> S {
    classification_uncertainty(dist) / S::of_count(dist.num_categories() as u64).ln()
}

/// `1 - RIoU(pred, gt)`, in `[0, 1]`.
pub fn localization_uncertainty<S: Real>(pred: &RotatedBox<S>, gt: &RotatedBox<S>) -> S {
    S::one() - riou(pred, gt)
}

/// Aspect-ratio weight `exp(-beta * |ln(h/w)|)`, in `(0, 1]`.
///
/// Equal to one exactly for squares or `beta = 0`; symmetric in `(w, h)`.
pub fn aspect_weight<S: Real>(w: S, h: S, beta: S) -> Result<S> {
    if !w.is_finite() || !h.is_finite() || w <= S::zero() || h <= S::zero() {
        return Err(Error::invalid("aspect weight needs positive finite extents"));
    }
    if !beta.is_finite() || beta < S::zero() {
        return Err(Error::invalid("beta must be finite and non-negative"));
    }
    Ok((-beta * (h / w).ln().abs()).exp())
}

/// The fused localization/orientation uncertainty of a prediction against
/// ground truth, with its components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocOrientTarget<S: Real = f64> {
    /// `1 - RIoU`, in `[0, 1]`.
    pub u_loc: S,
    /// Minimal angular deviation in radians, in `[0, pi/2]`.
    pub u_theta: S,
    /// Aspect-ratio weight, in `(0, 1]`.
    pub w_aspect: S,
    /// `w * u_loc + (1 - w) * u_theta / (pi/2)`, in `[0, 1]`.
    pub u_fused: S,
}

/// Computes the fused target. The ground-truth extents drive the aspect
/// weight, since the weight models the annotated object's shape.
pub fn loc_orient_target<S: Real>(
    pred: &RotatedBox<S>,
    gt: &RotatedBox<S>,
    beta: S,
) -> Result<LocOrientTarget<S>> {
    let u_loc = localization_uncertainty(pred, gt);
    let u_theta = angular_deviation(pred, gt);
    let w_aspect = aspect_weight(gt.w(), gt.h(), beta)?;
    let u_fused = w_aspect * u_loc + (S::one() - w_aspect) * u_theta / S::FRAC_PI_2();
    Ok(LocOrientTarget { u_loc, u_theta, w_aspect, u_fused })
}

/// Per-instance binary cross-entropy between a predicted uncertainty and its
/// target, both in `[0, 1]`. The prediction is clamped away from the log
/// singularities.
pub fn lup_loss<S: Real>(predicted: S, target: S) -> Result<S> {
    for (name, v) in [("predicted", predicted), ("target", target)] {
        if !v.is_finite() || v < S::zero() || v > S::one() {
            return Err(Error::invalid(format!("{name} uncertainty must lie in [0,1]")));
        }
    }
    let eps = S::of(LOG_CLAMP);
    let p = predicted.max(eps).min(S::one() - eps);
    Ok(-(target * p.ln() + (S::one() - target) * (S::one() - p).ln()))
}

/// Sum of per-instance losses over `(predicted, target)` pairs.
pub fn lup_loss_sum<S: Real>(pairs: &[(S, S)]) -> Result<S> {
    let mut acc = S::zero();
    for (p, t) in pairs {
        acc = acc + lup_loss(*p, *t)?;
    }
    Ok(acc)
}

/// Mean of per-instance losses; the default reduction for scale stability.
pub fn lup_loss_mean<S: Real>(pairs: &[(S, S)]) -> Result<S> {
    if pairs.is_empty() {
        return Err(Error::invalid("loss reduction over an empty batch"));
    }
    Ok(lup_loss_sum(pairs)? / S::of_count(pairs.len() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn dist(p: &[f64]) -> CategoryDistribution {
        CategoryDistribution::new(p.to_vec()).unwrap()
    }

    fn uniform(c: usize) -> CategoryDistribution {
        CategoryDistribution::new(vec![1.0 / c as f64; c]).unwrap()
    }

    #[test]
    fn distribution_validation() {
        assert!(CategoryDistribution::new(vec![1.0]).is_err());
        assert!(CategoryDistribution::new(vec![0.6, 0.6]).is_err());
        assert!(CategoryDistribution::new(vec![-0.1, 1.1]).is_err());
        assert!(CategoryDistribution::new(vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn from_scores_normalizes() {
        let d = CategoryDistribution::from_scores(vec![2.0, 2.0]).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.5]);
        assert!(CategoryDistribution::from_scores(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn entropy_fixtures() {
        let mut one_hot = vec![0.0; 15];
        one_hot[0] = 1.0;
        assert_eq!(classification_uncertainty(&dist(&one_hot)), 0.0);
        assert!((classification_uncertainty(&uniform(15)) - 15.0_f64.ln()).abs() < 1e-12);
        assert!((classification_uncertainty(&uniform(15)) - 2.70805).abs() < 1e-5);
        assert!((classification_uncertainty(&dist(&[0.5, 0.5])) - 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn normalized_entropy_fixtures() {
        let mut one_hot = vec![0.0; 15];
        one_hot[2] = 1.0;
        assert_eq!(normalized_classification_uncertainty(&dist(&one_hot)), 0.0);
        assert!((normalized_classification_uncertainty(&uniform(15)) - 1.0).abs() < 1e-12);
        let mut two = vec![0.0; 15];
        two[0] = 0.5;
        two[1] = 0.5;
        let expect = 2.0_f64.ln() / 15.0_f64.ln();
        assert!((normalized_classification_uncertainty(&dist(&two)) - expect).abs() < 1e-9);
        assert!((expect - 0.25596).abs() < 1e-5);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        let d = dist(&[0.25, 0.25, 0.25, 0.25]);
        assert_eq!(d.argmax(), 0);
        assert_eq!(d.confidence(), 0.25);
    }

    #[test]
    fn localization_uncertainty_fixtures() {
        let a: RotatedBox = RotatedBox::new(0.0, 0.0, 2.0, 2.0, 0.0).unwrap();
        assert_eq!(localization_uncertainty(&a, &a), 0.0);
        let far = RotatedBox::new(50.0, 0.0, 2.0, 2.0, 0.0).unwrap();
        assert_eq!(localization_uncertainty(&a, &far), 1.0);
        let b = RotatedBox::new(1.0, 0.0, 2.0, 2.0, 0.0).unwrap();
        assert!((localization_uncertainty(&a, &b) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn aspect_weight_fixtures() {
        assert_eq!(aspect_weight(3.0, 3.0, 0.7).unwrap(), 1.0);
        assert_eq!(aspect_weight(5.0, 1.0, 0.0).unwrap(), 1.0);
        let w = aspect_weight(10.0, 2.0, 0.5).unwrap();
        assert!((w - 0.2_f64.sqrt()).abs() < 1e-12);
        assert!((w - 0.447214).abs() < 1e-6);
        assert_eq!(w, aspect_weight(2.0, 10.0, 0.5).unwrap());
        assert!(aspect_weight(0.0, 1.0, 0.5).is_err());
        assert!(aspect_weight(1.0, 1.0, -0.5).is_err());
    }

    #[test]
    fn fused_target_fixtures() {
        let gt: RotatedBox = RotatedBox::new(0.0, 0.0, 10.0, 2.0, 0.0).unwrap();
        let same = loc_orient_target(&gt, &gt, 0.5).unwrap();
        assert_eq!(same.u_fused, 0.0);

        // squares collapse the fusion onto u_loc
        let sq_gt = RotatedBox::new(0.0, 0.0, 2.0, 2.0, 0.0).unwrap();
        let sq_pred = RotatedBox::new(1.0, 0.0, 2.0, 2.0, 0.0).unwrap();
        let t = loc_orient_target(&sq_pred, &sq_gt, 0.5).unwrap();
        assert_eq!(t.w_aspect, 1.0);
        assert_eq!(t.u_fused, t.u_loc);

        let pred = RotatedBox::new(0.0, 0.0, 10.0, 2.0, 0.2).unwrap();
        let t = loc_orient_target(&pred, &gt, 0.5).unwrap();
        assert!((t.u_theta - 0.2).abs() < 1e-12);
        assert!((t.w_aspect - 0.2_f64.sqrt()).abs() < 1e-12);
        let expect = t.w_aspect * t.u_loc + (1.0 - t.w_aspect) * (0.2 / FRAC_PI_2);
        assert!((t.u_fused - expect).abs() < 1e-12);
    }

    #[test]
    fn lup_loss_fixtures() {
        assert!((lup_loss(0.5, 0.5).unwrap() - 2.0_f64.ln()).abs() < 1e-12);
        assert!(lup_loss(1.0, 1.0).unwrap() <= 1e-6);
        assert!(lup_loss(1.2, 0.5).is_err());
        assert!(lup_loss(0.5, -0.1).is_err());
    }

    #[test]
    fn lup_loss_minimized_at_target() {
        let t = 0.37;
        let at_target = lup_loss(t, t).unwrap();
        let mut p = 0.0;
        while p <= 1.0 {
            assert!(lup_loss(p, t).unwrap() >= at_target - 1e-12);
            p += 1e-3;
        }
    }

    #[test]
    fn lup_loss_reductions() {
        let pairs = [(0.5, 0.5), (0.5, 0.5)];
        let sum = lup_loss_sum(&pairs).unwrap();
        let mean = lup_loss_mean(&pairs).unwrap();
        assert!((sum - 2.0 * 2.0_f64.ln()).abs() < 1e-12);
        assert!((mean - 2.0_f64.ln()).abs() < 1e-12);
        assert!(lup_loss_mean::<f64>(&[]).is_err());
    }
}
