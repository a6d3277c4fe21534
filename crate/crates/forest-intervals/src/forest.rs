use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{standardize_targets, Dataset, StandardizationParams};
use crate::error::{Error, Result};
use crate::kahan::KahanSum;

/// Settings for fitting a single regression tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeConfig {
    /// Minimum number of bootstrap rows in each child of a split.
    pub min_leaf: usize,
    /// Number of candidate features drawn (without replacement) at each node.
    pub max_features: usize,
}

/// Settings for fitting a forest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestConfig {
    /// Number of trees.
    pub n_trees: usize,
    /// Minimum number of bootstrap rows in each child of a split.
    pub min_leaf: usize,
    /// Candidate features per node; `None` means `max(1, n_features / 3)`.
    pub max_features: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 500,
            min_leaf: 5,
            max_features: None,
        }
    }
}

impl ForestConfig {
    /// Resolves the per-node feature budget for a dataset with `n_features`
    /// columns.
    pub fn resolved_max_features(&self, n_features: usize) -> usize {
        self.max_features.unwrap_or((n_features / 3).max(1))
    }
}

/// The full source of per-tree randomness: a bootstrap resample of the
/// training rows plus a seed for the node-level feature subsampling. Two
/// trees fitted from the same data and the same randomization vector are
/// identical, which is what makes parallel fitting reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomizationVector {
    /// Sampled row indices, drawn with replacement; length equals the number
    /// of training rows.
    pub bootstrap_indices: Vec<usize>,
    /// Seed for the RNG that draws feature subsets during tree growth.
    pub node_seed: u64,
}

impl RandomizationVector {
    /// Derives the randomization vector for tree `tree_index` from the forest
    /// seed. Each tree reads its own counter stream of the underlying ChaCha8
    /// generator (stream 0 is reserved for dataset shuffling), so the result
    /// depends only on `(seed, tree_index, n_rows)` and never on fitting
    /// order.
    pub fn derive(seed: u64, tree_index: usize, n_rows: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(tree_index as u64 + 1);
        let bootstrap_indices = (0..n_rows).map(|_| rng.gen_range(0..n_rows)).collect();
        let node_seed = rng.gen();
        Self {
            bootstrap_indices,
            node_seed,
        }
    }
}

/// A terminal node. `member_indices` holds every original training row whose
/// features route to this leaf, not just the bootstrap rows that grew it, so
/// a leaf is never empty and the forest can look up raw target values for
/// any query that lands here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub leaf_id: usize,
    pub member_indices: Vec<usize>,
    /// Mean target over `member_indices`.
    pub mean: f64,
}

/// One node of a regression tree, stored in a flat arena. Children of an
/// internal node always have larger indices than their parent, so routing
/// always terminates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(Leaf),
}

/// A fitted regression tree. The root is `nodes[0]`; queries with
/// `feature <= threshold` descend left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Routes a query to its leaf. Fails only on non-finite entries or when
    /// the query has fewer features than some split requires.
    pub fn leaf_of(&self, x: &[f64]) -> Result<&Leaf> {
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteQuery(pos));
        }
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= x.len() {
                        return Err(Error::DimensionMismatch {
                            got: x.len(),
                            expected: feature + 1,
                        });
                    }
                    idx = if x[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf(leaf) => return Ok(leaf),
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf(_)))
            .count()
    }

}

struct Grower<'a> {
    data: &'a Dataset,
    min_leaf: usize,
    max_features: usize,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
    next_leaf_id: usize,
}

impl Grower<'_> {
    /// Grows the subtree for one bootstrap row multiset and returns its node
    /// index. Nodes are visited in preorder, left child first, so the RNG
    /// consumption order is fixed.
    fn grow(&mut self, rows: Vec<usize>) -> usize {
        if rows.len() >= 2 * self.min_leaf && !self.targets_constant(&rows) {
            if let Some((feature, threshold)) = self.best_split(&rows) {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&r| self.data.feature(r, feature) <= threshold);
                let idx = self.nodes.len();
                // Placeholder, patched once both subtrees exist.
                self.nodes.push(TreeNode::Internal {
                    feature,
                    threshold,
                    left: 0,
                    right: 0,
                });
                let left = self.grow(left_rows);
                let right = self.grow(right_rows);
                self.nodes[idx] = TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                };
                return idx;
            }
        }
        let idx = self.nodes.len();
        self.nodes.push(TreeNode::Leaf(Leaf {
            leaf_id: self.next_leaf_id,
            member_indices: Vec::new(),
            mean: 0.0,
        }));
        self.next_leaf_id += 1;
        idx
    }

    fn targets_constant(&self, rows: &[usize]) -> bool {
        let first = self.data.targets()[rows[0]];
        rows.iter().all(|&r| self.data.targets()[r] == first)
    }

    /// Finds the variance-reduction-maximizing split over a random feature
    /// subset. Candidate thresholds are midpoints between consecutive
    /// distinct values; both children must keep at least `min_leaf` bootstrap
    /// rows. Ties are broken toward the lowest feature index, then the lowest
    /// threshold, by scanning candidates in that order and only accepting
    /// strict improvements.
    fn best_split(&mut self, rows: &[usize]) -> Option<(usize, f64)> {
        let p = self.data.n_features();
        let k = self.max_features.min(p);
        let mut cols: Vec<usize> = (0..p).collect();
        for i in 0..k {
            let j = self.rng.gen_range(i..p);
            cols.swap(i, j);
        }
        let mut subset = cols[..k].to_vec();
        subset.sort_unstable();

        let len = rows.len();
        let mut best: Option<(usize, f64)> = None;
        let mut best_gain = 0.0;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(len);
        for &feature in &subset {
            pairs.clear();
            pairs.extend(
                rows.iter()
                    .map(|&r| (self.data.feature(r, feature), self.data.targets()[r])),
            );
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

            let mut total_y = 0.0;
            let mut total_y2 = 0.0;
            for &(_, y) in &pairs {
                total_y += y;
                total_y2 += y * y;
            }
            let parent_sse = total_y2 - total_y * total_y / len as f64;

            let mut left_y = 0.0;
            let mut left_y2 = 0.0;
            for cut in 1..len {
                let y = pairs[cut - 1].1;
                left_y += y;
                left_y2 += y * y;
                if cut < self.min_leaf || len - cut < self.min_leaf {
                    continue;
                }
                let (lo, hi) = (pairs[cut - 1].0, pairs[cut].0);
                if lo == hi {
                    continue;
                }
                let left_sse = left_y2 - left_y * left_y / cut as f64;
                let right_y = total_y - left_y;
                let right_sse =
                    (total_y2 - left_y2) - right_y * right_y / (len - cut) as f64;
                let gain = parent_sse - left_sse - right_sse;
                if gain > best_gain {
                    // Midpoint between the adjacent distinct values. If it
                    // rounds up to `hi`, fall back to `lo` so rows with value
                    // `hi` still go right.
                    let mut threshold = 0.5 * lo + 0.5 * hi;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best_gain = gain;
                    best = Some((feature, threshold));
                }
            }
        }
        best
    }
}

/// Fits one regression tree on the bootstrap sample described by `theta`.
///
/// Growth recursively picks the variance-reduction-maximizing split over
/// `max_features` random candidate columns, and stops when a node has fewer
/// than `2 * min_leaf` bootstrap rows or its targets are constant. After
/// growth, every original training row is routed down the tree to populate
/// the leaf membership lists and leaf means.
pub fn fit_tree(train: &Dataset, theta: &RandomizationVector, config: &TreeConfig) -> Result<Tree> {
    let n = train.n_rows();
    let p = train.n_features();
    if config.min_leaf == 0 {
        return Err(Error::InvalidConfig("min_leaf must be at least 1".into()));
    }
    if config.max_features == 0 || config.max_features > p {
        return Err(Error::InvalidConfig(format!(
            "max_features must lie in 1..={p}, got {}",
            config.max_features
        )));
    }
    if theta.bootstrap_indices.len() != n {
        return Err(Error::InvalidConfig(format!(
            "bootstrap has {} indices for {} training rows",
            theta.bootstrap_indices.len(),
            n
        )));
    }
    if let Some(&bad) = theta.bootstrap_indices.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidConfig(format!(
            "bootstrap index {bad} out of range for {n} rows"
        )));
    }

    let mut grower = Grower {
        data: train,
        min_leaf: config.min_leaf,
        max_features: config.max_features,
        rng: ChaCha8Rng::seed_from_u64(theta.node_seed),
        nodes: Vec::new(),
        next_leaf_id: 0,
    };
    let root = grower.grow(theta.bootstrap_indices.clone());
    debug_assert_eq!(root, 0);
    let mut tree = Tree {
        nodes: grower.nodes,
    };

    // Populate leaves with all original rows. Each leaf received at least
    // min_leaf bootstrap rows during growth and those rows route back to it,
    // so no leaf stays empty.
    let mut memberships: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes.len()];
    for r in 0..n {
        let mut idx = 0;
        loop {
            match &tree.nodes[idx] {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if train.feature(r, *feature) <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                TreeNode::Leaf(_) => break,
            }
        }
        memberships[idx].push(r);
    }
    for (idx, node) in tree.nodes.iter_mut().enumerate() {
        if let TreeNode::Leaf(leaf) = node {
            let members = std::mem::take(&mut memberships[idx]);
            debug_assert!(!members.is_empty());
            let mut sum = KahanSum::new();
            for &r in &members {
                sum.add(train.targets()[r]);
            }
            leaf.mean = sum.value() / members.len() as f64;
            leaf.member_indices = members;
        }
    }
    Ok(tree)
}

/// Snapshot of everything needed to rebuild or audit a fitted forest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedConfig {
    pub n_trees: usize,
    pub min_leaf: usize,
    pub max_features: usize,
    pub seed: u64,
    pub n_features: usize,
}

/// A fitted random forest together with the standardized training targets
/// and the standardization parameters that map between raw and standardized
/// target units.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    targets: Vec<f64>,
    standardization: StandardizationParams,
    fitted: FittedConfig,
}

impl Forest {
    /// Assembles a forest from parts, validating structural invariants.
    /// This is the path a deserialized model goes through, so it rejects
    /// out-of-range indices, empty leaves, and cycles.
    pub fn from_parts(
        trees: Vec<Tree>,
        targets: Vec<f64>,
        standardization: StandardizationParams,
        fitted: FittedConfig,
    ) -> Result<Self> {
        if trees.is_empty() || trees.len() != fitted.n_trees {
            return Err(Error::CorruptModel(format!(
                "{} trees stored but config says {}",
                trees.len(),
                fitted.n_trees
            )));
        }
        if targets.is_empty() || targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::CorruptModel(
                "targets must be non-empty and finite".into(),
            ));
        }
        if !standardization.mean.is_finite() || !(standardization.std > 0.0) {
            return Err(Error::CorruptModel(
                "standardization must have finite mean and positive std".into(),
            ));
        }
        if fitted.n_features == 0
            || fitted.min_leaf == 0
            || fitted.max_features == 0
            || fitted.max_features > fitted.n_features
        {
            return Err(Error::CorruptModel("invalid fitted configuration".into()));
        }
        for (t, tree) in trees.iter().enumerate() {
            if tree.nodes.is_empty() {
                return Err(Error::CorruptModel(format!("tree {t} has no nodes")));
            }
            for (i, node) in tree.nodes.iter().enumerate() {
                match node {
                    TreeNode::Internal {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        if *feature >= fitted.n_features {
                            return Err(Error::CorruptModel(format!(
                                "tree {t} node {i} splits on feature {feature}, model has {}",
                                fitted.n_features
                            )));
                        }
                        if !threshold.is_finite() {
                            return Err(Error::CorruptModel(format!(
                                "tree {t} node {i} has non-finite threshold"
                            )));
                        }
                        if *left <= i || *right <= i || *left >= tree.nodes.len()
                            || *right >= tree.nodes.len()
                        {
                            return Err(Error::CorruptModel(format!(
                                "tree {t} node {i} has out-of-order child indices"
                            )));
                        }
                    }
                    TreeNode::Leaf(leaf) => {
                        if leaf.member_indices.is_empty() {
                            return Err(Error::CorruptModel(format!(
                                "tree {t} node {i} is an empty leaf"
                            )));
                        }
                        if leaf.member_indices.iter().any(|&m| m >= targets.len()) {
                            return Err(Error::CorruptModel(format!(
                                "tree {t} node {i} references a missing training row"
                            )));
                        }
                        if !leaf.mean.is_finite() {
                            return Err(Error::CorruptModel(format!(
                                "tree {t} node {i} has non-finite mean"
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self {
            trees,
            targets,
            standardization,
            fitted,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Standardized training targets, indexed by leaf membership lists.
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn standardization(&self) -> StandardizationParams {
        self.standardization
    }

    pub fn fitted_config(&self) -> FittedConfig {
        self.fitted
    }

    pub fn n_features(&self) -> usize {
        self.fitted.n_features
    }

    pub(crate) fn check_query(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.fitted.n_features {
            return Err(Error::DimensionMismatch {
                got: x.len(),
                expected: self.fitted.n_features,
            });
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteQuery(pos));
        }
        Ok(())
    }

    /// Point prediction in standardized target units: the average of the
    /// per-tree leaf means.
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_query(x)?;
        let mut sum = KahanSum::new();
        for tree in &self.trees {
            sum.add(tree.leaf_of(x)?.mean);
        }
        Ok(sum.value() / self.trees.len() as f64)
    }
}

/// Fits a random forest. Targets are standardized internally (the returned
/// forest stores the parameters), each tree gets an independent bootstrap
/// resample derived from `seed`, and trees are fitted in parallel. The
/// result depends only on the data, the configuration, and the seed.
pub fn fit_forest(train: &Dataset, config: &ForestConfig, seed: u64) -> Result<Forest> {
    if config.n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
    }
    let p = train.n_features();
    let max_features = config.resolved_max_features(p);
    if max_features > p {
        return Err(Error::InvalidConfig(format!(
            "max_features {} exceeds feature count {}",
            max_features, p
        )));
    }
    let (train_std, standardization) = standardize_targets(train)?;
    let tree_config = TreeConfig {
        min_leaf: config.min_leaf,
        max_features,
    };
    let n = train_std.n_rows();
    let trees: Vec<Tree> = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let theta = RandomizationVector::derive(seed, i, n);
            fit_tree(&train_std, &theta, &tree_config)
        })
        .collect::<Result<_>>()?;
    let fitted = FittedConfig {
        n_trees: config.n_trees,
        min_leaf: config.min_leaf,
        max_features,
        seed,
        n_features: p,
    };
    Ok(Forest {
        targets: train_std.targets().to_vec(),
        trees,
        standardization,
        fitted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line_dataset(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let targets: Vec<f64> = (0..n).map(|i| i as f64 * 10.0).collect();
        Dataset::new(rows, targets, vec!["x".into()]).unwrap()
    }

    fn identity_theta(n: usize) -> RandomizationVector {
        RandomizationVector {
            bootstrap_indices: (0..n).collect(),
            node_seed: 0,
        }
    }

    #[test]
    fn derive_is_deterministic_and_index_dependent() {
        let a = RandomizationVector::derive(42, 3, 100);
        let b = RandomizationVector::derive(42, 3, 100);
        let c = RandomizationVector::derive(42, 4, 100);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.bootstrap_indices.len(), 100);
        assert!(a.bootstrap_indices.iter().all(|&i| i < 100));
    }

    #[test]
    fn identity_bootstrap_on_separable_data_grows_pure_leaves() {
        let data = line_dataset(4);
        let config = TreeConfig {
            min_leaf: 1,
            max_features: 1,
        };
        let tree = fit_tree(&data, &identity_theta(4), &config).unwrap();
        assert_eq!(tree.n_leaves(), 4);
        for (i, want) in [0.0, 10.0, 20.0, 30.0].iter().enumerate() {
            let leaf = tree.leaf_of(&[i as f64]).unwrap();
            assert_eq!(leaf.member_indices, vec![i]);
            assert_eq!(leaf.mean, *want);
        }
        // Queries between training points route to the nearest region.
        let leaf = tree.leaf_of(&[1.2]).unwrap();
        assert_eq!(leaf.member_indices, vec![1]);
    }

    #[test]
    fn min_leaf_stops_growth() {
        let data = line_dataset(10);
        let config = TreeConfig {
            min_leaf: 5,
            max_features: 1,
        };
        let tree = fit_tree(&data, &identity_theta(10), &config).unwrap();
        // 10 rows with min_leaf 5 allows exactly one split into 5 + 5.
        assert_eq!(tree.n_leaves(), 2);
        for node in &tree.nodes {
            if let TreeNode::Leaf(leaf) = node {
                assert!(leaf.member_indices.len() >= 5);
            }
        }
    }

    #[test]
    fn constant_targets_make_a_single_leaf() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let data = Dataset::new(rows, vec![7.0; 8], vec!["x".into()]).unwrap();
        let config = TreeConfig {
            min_leaf: 1,
            max_features: 1,
        };
        let tree = fit_tree(&data, &identity_theta(8), &config).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        let leaf = tree.leaf_of(&[3.0]).unwrap();
        assert_eq!(leaf.member_indices, (0..8).collect::<Vec<_>>());
        assert_eq!(leaf.mean, 7.0);
    }

    #[test]
    fn constant_features_make_a_single_leaf() {
        let rows: Vec<Vec<f64>> = (0..8).map(|_| vec![1.5]).collect();
        let targets: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let data = Dataset::new(rows, targets, vec!["x".into()]).unwrap();
        let config = TreeConfig {
            min_leaf: 1,
            max_features: 1,
        };
        let tree = fit_tree(&data, &identity_theta(8), &config).unwrap();
        assert_eq!(tree.nodes.len(), 1);
    }

    #[test]
    fn rejects_bad_bootstrap_and_config() {
        let data = line_dataset(4);
        let config = TreeConfig {
            min_leaf: 1,
            max_features: 1,
        };
        let short = RandomizationVector {
            bootstrap_indices: vec![0, 1],
            node_seed: 0,
        };
        assert!(fit_tree(&data, &short, &config).is_err());
        let out_of_range = RandomizationVector {
            bootstrap_indices: vec![0, 1, 2, 9],
            node_seed: 0,
        };
        assert!(fit_tree(&data, &out_of_range, &config).is_err());
        let bad_features = TreeConfig {
            min_leaf: 1,
            max_features: 2,
        };
        assert!(fit_tree(&data, &identity_theta(4), &bad_features).is_err());
    }

    #[test]
    fn routing_rejects_non_finite_and_short_queries() {
        let data = line_dataset(10);
        let config = TreeConfig {
            min_leaf: 1,
            max_features: 1,
        };
        let tree = fit_tree(&data, &identity_theta(10), &config).unwrap();
        assert!(matches!(
            tree.leaf_of(&[f64::NAN]),
            Err(Error::NonFiniteQuery(0))
        ));
        assert!(matches!(
            tree.leaf_of(&[]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn forest_fit_is_reproducible() {
        let data = line_dataset(30);
        let config = ForestConfig {
            n_trees: 12,
            min_leaf: 2,
            max_features: None,
        };
        let a = fit_forest(&data, &config, 42).unwrap();
        let b = fit_forest(&data, &config, 42).unwrap();
        assert_eq!(a, b);
        let c = fit_forest(&data, &config, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn forest_standardizes_targets_internally() {
        let data = line_dataset(30);
        let config = ForestConfig {
            n_trees: 5,
            min_leaf: 2,
            max_features: None,
        };
        let forest = fit_forest(&data, &config, 1).unwrap();
        let n = 30.0;
        let mean: f64 = forest.targets().iter().sum::<f64>() / n;
        assert!(mean.abs() < 1e-9);
        let params = forest.standardization();
        assert!((params.mean - 145.0).abs() < 1e-9);
        // predict_mean is in standardized units; a central query should sit
        // near the center of the target distribution.
        let z = forest.predict_mean(&[14.5]).unwrap();
        assert!(z.abs() < 0.5, "central prediction {z} too far from 0");
    }

    #[test]
    fn predict_mean_validates_dimensions() {
        let data = line_dataset(10);
        let forest = fit_forest(
            &data,
            &ForestConfig {
                n_trees: 3,
                min_leaf: 2,
                max_features: None,
            },
            0,
        )
        .unwrap();
        assert!(matches!(
            forest.predict_mean(&[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                got: 2,
                expected: 1
            })
        ));
    }

    #[test]
    fn from_parts_rejects_corrupt_models() {
        let fitted = FittedConfig {
            n_trees: 1,
            min_leaf: 1,
            max_features: 1,
            seed: 0,
            n_features: 1,
        };
        let params = StandardizationParams::identity();
        let leaf = |members: Vec<usize>| {
            Tree {
                nodes: vec![TreeNode::Leaf(Leaf {
                    leaf_id: 0,
                    member_indices: members,
                    mean: 0.0,
                })],
            }
        };
        assert!(Forest::from_parts(vec![leaf(vec![0])], vec![0.0, 1.0], params, fitted).is_ok());
        // Empty leaf.
        assert!(Forest::from_parts(vec![leaf(vec![])], vec![0.0], params, fitted).is_err());
        // Member index out of range.
        assert!(Forest::from_parts(vec![leaf(vec![5])], vec![0.0], params, fitted).is_err());
        // Tree count mismatch.
        assert!(
            Forest::from_parts(vec![leaf(vec![0]), leaf(vec![0])], vec![0.0], params, fitted)
                .is_err()
        );
        // Backward child edge.
        let cyclic = Tree {
            nodes: vec![TreeNode::Internal {
                feature: 0,
                threshold: 0.0,
                left: 0,
                right: 0,
            }],
        };
        assert!(Forest::from_parts(vec![cyclic], vec![0.0], params, fitted).is_err());
    }

    proptest! {
        #[test]
        fn leaf_memberships_partition_training_rows(
            seed in 0u64..500,
            n in 5usize..60,
            min_leaf in 1usize..5
        ) {
            let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![(i as f64 * 0.7).sin(), i as f64]).collect();
            let targets: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
            let data = Dataset::new(rows, targets, vec!["a".into(), "b".into()]).unwrap();
            let theta = RandomizationVector::derive(seed, 0, n);
            let config = TreeConfig { min_leaf, max_features: 2 };
            let tree = fit_tree(&data, &theta, &config).unwrap();

            let mut seen = vec![false; n];
            for node in &tree.nodes {
                if let TreeNode::Leaf(leaf) = node {
                    prop_assert!(!leaf.member_indices.is_empty());
                    for &m in &leaf.member_indices {
                        prop_assert!(!seen[m], "row {m} appears in two leaves");
                        seen[m] = true;
                    }
                }
            }
            prop_assert!(seen.iter().all(|&s| s), "some row is in no leaf");

            // Every leaf held at least min_leaf bootstrap rows during growth.
            let mut bootstrap_counts = std::collections::HashMap::new();
            for &r in &theta.bootstrap_indices {
                let leaf = tree.leaf_of(data.row(r)).unwrap();
                *bootstrap_counts.entry(leaf.leaf_id).or_insert(0usize) += 1;
            }
            prop_assert_eq!(bootstrap_counts.len(), tree.n_leaves());
            for (_, count) in bootstrap_counts {
                prop_assert!(count >= min_leaf);
            }
        }

        #[test]
        fn leaf_mean_matches_member_targets(seed in 0u64..200) {
            let n = 40;
            let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![(i as f64).sqrt()]).collect();
            let targets: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 5.0).collect();
            let data = Dataset::new(rows, targets.clone(), vec!["x".into()]).unwrap();
            let theta = RandomizationVector::derive(seed, 1, n);
            let tree = fit_tree(&data, &theta, &TreeConfig { min_leaf: 3, max_features: 1 }).unwrap();
            for node in &tree.nodes {
                if let TreeNode::Leaf(leaf) = node {
                    let want: f64 = leaf.member_indices.iter().map(|&m| targets[m]).sum::<f64>()
                        / leaf.member_indices.len() as f64;
                    prop_assert!((leaf.mean - want).abs() < 1e-12);
                }
            }
        }
    }
}
