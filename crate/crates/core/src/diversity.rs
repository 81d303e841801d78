//! Category diversity signals: a count-driven inter-category term, a
//! prototype-similarity intra-category term, and the exponential-moving-average
//! prototype store that backs both.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A finite feature embedding of dimension `D >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<S: Real = f64> {
    values: Vec<S>,
}

impl<S: Real> FeatureVector<S> {
    pub fn new(values: Vec<S>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("feature vector must not be empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature vector contains a non-finite value"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> S {
        self.values.iter().fold(S::zero(), |acc, v| acc + *v * *v).sqrt()
    }

    pub fn dot(&self, other: &Self) -> S {
        self.values
            .iter()
            .zip(&other.values)
            .fold(S::zero(), |acc, (a, b)| acc + *a * *b)
    }
}

/// Sigmoid-like inter-category diversity `1 / (1 + e^(gamma * n - 1))`.
///
/// Strictly decreasing in the labeled count `n`, in `(0, 1)`.
pub fn inter_class_diversity<S: Real>(n: u64, gamma: S) -> Result<S> {
    if !gamma.is_finite() || gamma <= S::zero() {
        return Err(Error::invalid("gamma must be finite and positive"));
    }
    Ok(S::one() / (S::one() + (gamma * S::of_count(n) - S::one()).exp()))
}

/// Cosine-distance intra-category diversity `1 - cos(f, prototype)`, in `[0, 2]`.
pub fn intra_class_diversity<S: Real>(
    f: &FeatureVector<S>,
    prototype: &FeatureVector<S>,
) -> Result<S> {
    if f.dim() != prototype.dim() {
        return Err(Error::invalid(format!(
            "feature dimension {} does not match prototype dimension {}",
            f.dim(),
            prototype.dim()
        )));
    }
    let denom = f.norm() * prototype.norm();
    if denom <= S::zero() {
        return Err(Error::invalid("cosine similarity is undefined for zero-norm vectors"));
    }
    // clamp the cosine against rounding drift before forming the distance
    let cos = (f.dot(prototype) / denom).min(S::one()).max(-S::one());
    Ok(S::one() - cos)
}

/// Intra-category diversity rescaled to `[0, 1]`.
///
/// Returns the neutral value `0.5` when the category has no prototype yet, so
/// unseen categories are boosted only through the inter-category term.
pub fn normalized_intra_diversity<S: Real>(
    f: &FeatureVector<S>,
    prototype: Option<&FeatureVector<S>>,
) -> Result<S> {
    match prototype {
        Some(p) => Ok(intra_class_diversity(f, p)? / S::of(2.0)),
        None => Ok(S::of(0.5)),
    }
}

#[derive(Debug, Clone, PartialEq)]
struct CategoryState<S: Real> {
    prototype: Option<FeatureVector<S>>,
    count: u64,
}

/// Per-category EMA feature prototypes and labeled-instance counts.
///
/// Counts grow on initial annotation and on every in-round pick; the
/// annotation step later corrects counts where a pseudo-category turned out
/// wrong. Mutation is single-writer; scoring reads a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeStore<S: Real = f64> {
    categories: BTreeMap<u32, CategoryState<S>>,
    alpha: S,
    gamma: S,
}

impl<S: Real> PrototypeStore<S> {
    /// An empty store with the given EMA momentum and diversity smoothing.
    pub fn new(alpha: S, gamma: S) -> Result<Self> {
        if !alpha.is_finite() || alpha < S::zero() || alpha >= S::one() {
            return Err(Error::invalid("alpha must lie in [0, 1)"));
        }
        if !gamma.is_finite() || gamma <= S::zero() {
            return Err(Error::invalid("gamma must be finite and positive"));
        }
        Ok(Self { categories: BTreeMap::new(), alpha, gamma })
    }

    /// Initializes prototypes as the arithmetic mean of the labeled features
    /// per category, with counts reflecting multiplicity.
    pub fn init_prototypes(
        labeled: &[(u32, FeatureVector<S>)],
        alpha: S,
        gamma: S,
    ) -> Result<Self> {
        if labeled.is_empty() {
            return Err(Error::invalid("cannot initialize prototypes from an empty labeled set"));
        }
        let dim = labeled[0].1.dim();
        let mut store = Self::new(alpha, gamma)?;
        let mut sums: BTreeMap<u32, (Vec<S>, u64)> = BTreeMap::new();
        for (category, feature) in labeled {
            if feature.dim() != dim {
                return Err(Error::invalid("labeled features have inconsistent dimensions"));
            }
            let entry = sums.entry(*category).or_insert_with(|| (vec![S::zero(); dim], 0));
            for (acc, v) in entry.0.iter_mut().zip(feature.values()) {
                *acc = *acc + *v;
            }
            entry.1 += 1;
        }
        for (category, (sum, count)) in sums {
            let denom = S::of_count(count);
            let mean = FeatureVector::new(sum.into_iter().map(|v| v / denom).collect())?;
            store
                .categories
                .insert(category, CategoryState { prototype: Some(mean), count });
        }
        Ok(store)
    }

    /// Rebuilds a store from persisted parts.
    pub fn from_parts(
        alpha: S,
        gamma: S,
        entries: impl IntoIterator<Item = (u32, Option<FeatureVector<S>>, u64)>,
    ) -> Result<Self> {
        let mut store = Self::new(alpha, gamma)?;
        for (category, prototype, count) in entries {
            store.categories.insert(category, CategoryState { prototype, count });
        }
        Ok(store)
    }

    pub fn alpha(&self) -> S {
        self.alpha
    }

    pub fn gamma(&self) -> S {
        self.gamma
    }

    pub fn prototype(&self, category: u32) -> Option<&FeatureVector<S>> {
        self.categories.get(&category).and_then(|c| c.prototype.as_ref())
    }

    /// Labeled count of a category; zero when never seen.
    pub fn count(&self, category: u32) -> u64 {
        self.categories.get(&category).map_or(0, |c| c.count)
    }

    /// All per-category `(prototype, count)` entries, in category order.
    pub fn entries(&self) -> impl Iterator<Item = (u32, Option<&FeatureVector<S>>, u64)> {
        self.categories.iter().map(|(c, s)| (*c, s.prototype.as_ref(), s.count))
    }

    /// Inter-category diversity of a candidate of this category, from the
    /// current labeled count and the store's gamma.
    pub fn inter_diversity(&self, category: u32) -> S {
        S::one() / (S::one() + (self.gamma * S::of_count(self.count(category)) - S::one()).exp())
    }

    /// Normalized intra-category diversity of a feature against this
    /// category's prototype (neutral `0.5` when absent).
    pub fn intra_diversity_normalized(&self, category: u32, f: &FeatureVector<S>) -> Result<S> {
        normalized_intra_diversity(f, self.prototype(category))
    }

    /// EMA update `P <- alpha * P + (1 - alpha) * f` (or adoption when the
    /// prototype is absent), incrementing the labeled count.
    pub fn update_prototype(&mut self, category: u32, f: &FeatureVector<S>) -> Result<()> {
        let alpha = self.alpha;
        let state = self
            .categories
            .entry(category)
            .or_insert(CategoryState { prototype: None, count: 0 });
        match &mut state.prototype {
            Some(p) => {
                if p.dim() != f.dim() {
                    return Err(Error::invalid(format!(
                        "feature dimension {} does not match prototype dimension {}",
                        f.dim(),
                        p.dim()
                    )));
                }
                let blended: Vec<S> = p
                    .values()
                    .iter()
                    .zip(f.values())
                    .map(|(p, v)| alpha * *p + (S::one() - alpha) * *v)
                    .collect();
                *p = FeatureVector::new(blended)?;
            }
            None => state.prototype = Some(f.clone()),
        }
        state.count += 1;
        Ok(())
    }

    /// Records one more labeled instance of a category without touching its
    /// prototype.
    pub fn increment_count(&mut self, category: u32) {
        self.categories
            .entry(category)
            .or_insert(CategoryState { prototype: None, count: 0 })
            .count += 1;
    }

    /// Moves one labeled count from `from` to `to`; used when annotation
    /// reveals a pseudo-category was wrong.
    pub fn reassign_count(&mut self, from: u32, to: u32) -> Result<()> {
        if from == to {
            return Ok(());
        }
        let source = self
            .categories
            .get_mut(&from)
            .filter(|s| s.count > 0)
            .ok_or_else(|| {
                Error::contract(format!("cannot decrement count of category {from} below zero"))
            })?;
        source.count -= 1;
        self.categories
            .entry(to)
            .or_insert(CategoryState { prototype: None, count: 0 })
            .count += 1;
        Ok(())
    }
}
