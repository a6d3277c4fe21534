use crate::error::{Error, Result};
use crate::forest::{Forest, Tree};
use crate::kahan::{kahan_sum, KahanSum};

/// Non-negative weights over the training rows for one query point. The
/// weights of a fitted tree or forest always sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    /// Wraps a raw weight vector, rejecting negative or non-finite entries.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("weight vector is empty".into()));
        }
        if let Some(&bad) = weights.iter().find(|&&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "weights must be finite and non-negative, got {bad}"
            )));
        }
        Ok(Self { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Compensated sum of all weights.
    pub fn sum(&self) -> f64 {
        kahan_sum(&self.weights)
    }
}

/// Weights assigned by a single tree: each member of the leaf the query
/// routes to receives `1 / |leaf|`, every other row receives 0.
pub fn tree_weights(tree: &Tree, x: &[f64], n_train: usize) -> Result<WeightVector> {
    let leaf = tree.leaf_of(x)?;
    let mut weights = vec![0.0; n_train];
    let w = 1.0 / leaf.member_indices.len() as f64;
    for &i in &leaf.member_indices {
        if i >= n_train {
            return Err(Error::CorruptModel(format!(
                "leaf references row {i}, training set has {n_train}"
            )));
        }
        weights[i] = w;
    }
    WeightVector::new(weights)
}

/// Weights assigned by the whole forest: the average of the per-tree weight
/// vectors. Row `i` receives `(1/m) * sum_t 1[i in leaf_t(x)] / |leaf_t(x)|`.
pub fn forest_weights(forest: &Forest, x: &[f64]) -> Result<WeightVector> {
    forest.check_query(x)?;
    let n = forest.targets().len();
    let m = forest.n_trees() as f64;
    let mut acc = vec![KahanSum::new(); n];
    for tree in forest.trees() {
        let leaf = tree.leaf_of(x)?;
        let contribution = 1.0 / (leaf.member_indices.len() as f64 * m);
        for &i in &leaf.member_indices {
            acc[i].add(contribution);
        }
    }
    let weights: Vec<f64> = acc.into_iter().map(|a| a.value()).collect();
    debug_assert!((kahan_sum(&weights) - 1.0).abs() < 1e-9);
    WeightVector::new(weights)
}

/// A discrete distribution over the distinct target values carrying positive
/// weight for one query: sorted support points, their collapsed masses, and
/// a cumulative-mass table.
///
/// The cumulative table is the single source of truth for every probability
/// computed from this distribution (CDF lookups, quantiles, interval masses).
/// It is built once with compensated summation and clamped to be
/// non-decreasing, so any two code paths that measure the same index range
/// get bit-identical masses.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportDistribution {
    support: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl SupportDistribution {
    /// Builds a distribution from sorted distinct support points and their
    /// masses. Weights must be strictly positive and sum to 1 within 1e-9.
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("support is empty".into()));
        }
        if support.len() != weights.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} support points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        if let Some(&bad) = support.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "support contains non-finite value {bad}"
            )));
        }
        if support.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidDistribution(
                "support must be strictly increasing".into(),
            ));
        }
        if let Some(&bad) = weights.iter().find(|&&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "weights must be strictly positive, got {bad}"
            )));
        }
        let total = kahan_sum(&weights);
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }

        let mut cumulative = Vec::with_capacity(weights.len() + 1);
        cumulative.push(0.0);
        let mut acc = KahanSum::new();
        let mut prev = 0.0_f64;
        for &w in &weights {
            acc.add(w);
            // Clamp so the table is non-decreasing even if compensation
            // rounds downward.
            prev = acc.value().max(prev);
            cumulative.push(prev);
        }
        Ok(Self {
            support,
            weights,
            cumulative,
        })
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Sorted distinct target values with positive mass.
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    /// Mass of each support point, aligned with `support()`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn min(&self) -> f64 {
        self.support[0]
    }

    pub fn max(&self) -> f64 {
        *self.support.last().unwrap()
    }

    pub fn total_mass(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Cumulative-mass table: `cumulative()[k]` is the mass of the first `k`
    /// support points. Non-decreasing, with a leading 0.
    pub(crate) fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Mass of the inclusive index range `lo..=hi`.
    pub(crate) fn mass_of_range(&self, lo: usize, hi: usize) -> f64 {
        debug_assert!(lo <= hi && hi < self.len());
        self.cumulative[hi + 1] - self.cumulative[lo]
    }

    /// Weighted empirical CDF: the total mass of support points `<= y`.
    pub fn cdf(&self, y: f64) -> f64 {
        let k = self.support.partition_point(|&s| s <= y);
        self.cumulative[k]
    }

    /// Probability mass of the closed interval `[lower, upper]`.
    pub fn interval_probability(&self, lower: f64, upper: f64) -> Result<f64> {
        if !(lower <= upper) {
            return Err(Error::InvertedInterval { lower, upper });
        }
        let lo = self.support.partition_point(|&s| s < lower);
        let hi = self.support.partition_point(|&s| s <= upper);
        Ok(self.cumulative[hi] - self.cumulative[lo])
    }
}

/// Collapses a weight vector over training rows into a distribution over the
/// distinct target values that carry positive weight. Rows sharing a target
/// value pool their mass.
pub fn support_distribution(w: &WeightVector, targets: &[f64]) -> Result<SupportDistribution> {
    if targets.len() != w.len() {
        return Err(Error::InvalidDistribution(format!(
            "{} weights but {} targets",
            w.len(),
            targets.len()
        )));
    }
    if let Some(&bad) = targets.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidDistribution(format!(
            "targets contain non-finite value {bad}"
        )));
    }
    let mut pairs: Vec<(f64, f64)> = targets
        .iter()
        .zip(w.weights())
        .filter(|(_, &wi)| wi > 0.0)
        .map(|(&y, &wi)| (y, wi))
        .collect();
    if pairs.is_empty() {
        return Err(Error::InvalidDistribution(
            "no training row carries positive weight".into(),
        ));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut support = Vec::new();
    let mut weights = Vec::new();
    let mut acc = KahanSum::new();
    acc.add(pairs[0].1);
    let mut current = pairs[0].0;
    for &(y, wi) in &pairs[1..] {
        // Numeric equality (not bitwise) so -0.0 and 0.0 pool their mass.
        if y == current {
            acc.add(wi);
        } else {
            support.push(current);
            weights.push(acc.value());
            acc = KahanSum::new();
            acc.add(wi);
            current = y;
        }
    }
    support.push(current);
    weights.push(acc.value());
    SupportDistribution::new(support, weights)
}

/// Convenience composition: forest weights for `x`, collapsed over the
/// stored (standardized) training targets.
pub fn query_distribution(forest: &Forest, x: &[f64]) -> Result<SupportDistribution> {
    let w = forest_weights(forest, x)?;
    support_distribution(&w, forest.targets())
}
