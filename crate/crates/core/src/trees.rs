//! Single-task CART regression trees with a penalized impurity decrease.
//!
//! A candidate split on feature `f` pays `lambda` when `f` has not been used
//! by the model yet; splits on already-used features are free. The penalty is
//! what drives sparse feature selection.
//!
//! Split search is exact: every midpoint between consecutive distinct values
//! of a feature is considered. Growth presorts each feature once per dataset
//! and keeps per-node sorted index lists, so a level of the tree costs
//! `O(d * n)`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{BoutsError, Result};
use crate::matrix::Matrix;
use crate::par::*;

/// Split scoring rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Weighted decrease of the population variance.
    Variance,
    /// `n_l * n_r / (n_l + n_r) * (mean_l - mean_r)^2`.
    #[default]
    Friedman,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Splits whose penalized gain is not above this become leaves.
    pub min_gain: f64,
    pub criterion: Criterion,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 3,
            min_samples_leaf: 5,
            min_gain: 1e-7,
            criterion: Criterion::Friedman,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(BoutsError::config("max_depth must be at least 1"));
        }
        if self.min_samples_leaf < 1 {
            return Err(BoutsError::config("min_samples_leaf must be at least 1"));
        }
        if !(self.min_gain >= 0.0 && self.min_gain.is_finite()) {
            return Err(BoutsError::config("min_gain must be a finite non-negative number"));
        }
        Ok(())
    }
}

/// Feature indices already paid for.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UsedFeatures(BTreeSet<usize>);

impl UsedFeatures {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn contains(&self, f: usize) -> bool {
        self.0.contains(&f)
    }

    pub fn insert(&mut self, f: usize) -> bool {
        self.0.insert(f)
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = usize>) {
        self.0.extend(other);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_set(&self) -> &BTreeSet<usize> {
        &self.0
    }

    /// Cost of splitting on `f`.
    #[inline]
    pub fn penalty(&self, f: usize, lambda: f64) -> f64 {
        if self.contains(f) {
            0.0
        } else {
            lambda
        }
    }
}

impl FromIterator<usize> for UsedFeatures {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        UsedFeatures(iter.into_iter().collect())
    }
}

/// Population variance.
pub fn impurity(targets: &[f64]) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    targets.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Gain of a split from child counts and target sums.
///
/// For the variance criterion this is the weighted impurity decrease in its
/// closed form `n_l * n_r / n^2 * (mean_l - mean_r)^2`.
#[inline]
pub fn split_gain(n_left: usize, sum_left: f64, n_right: usize, sum_right: f64, criterion: Criterion) -> f64 {
    let nl = n_left as f64;
    let nr = n_right as f64;
    let diff = sum_left / nl - sum_right / nr;
    let n = nl + nr;
    match criterion {
        Criterion::Variance => nl * nr / (n * n) * diff * diff,
        Criterion::Friedman => nl * nr / n * diff * diff,
    }
}

#[inline]
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = 0.5 * (lo + hi);
    if m < hi {
        m
    } else {
        lo
    }
}

/// Rows of one node over a row-major matrix with a target per row.
#[derive(Debug, Clone, Copy)]
pub struct NodeView<'a> {
    pub x: &'a Matrix,
    pub targets: &'a [f64],
    pub indices: &'a [usize],
}

impl<'a> NodeView<'a> {
    pub fn new(x: &'a Matrix, targets: &'a [f64], indices: &'a [usize]) -> Self {
        NodeView { x, targets, indices }
    }

    fn node_targets(&self) -> Vec<f64> {
        self.indices.iter().map(|&i| self.targets[i]).collect()
    }

    pub fn impurity(&self) -> f64 {
        impurity(&self.node_targets())
    }

    /// Unpenalized gain of splitting at `x[f] <= v`; `None` when a child
    /// would be empty.
    pub fn raw_gain(&self, f: usize, v: f64, criterion: Criterion) -> Option<f64> {
        let (left, right): (Vec<usize>, Vec<usize>) = self.indices.iter().partition(|&&i| self.x.get(i, f) <= v);
        if left.is_empty() || right.is_empty() {
            return None;
        }
        let yl: Vec<f64> = left.iter().map(|&i| self.targets[i]).collect();
        let yr: Vec<f64> = right.iter().map(|&i| self.targets[i]).collect();
        let n = self.indices.len() as f64;
        Some(match criterion {
            Criterion::Variance => {
                self.impurity() - yl.len() as f64 / n * impurity(&yl) - yr.len() as f64 / n * impurity(&yr)
            }
            Criterion::Friedman => split_gain(yl.len(), yl.iter().sum(), yr.len(), yr.iter().sum(), criterion),
        })
    }

    /// `raw_gain` minus `lambda` when `f` is not in `used`.
    pub fn penalized_gain(&self, f: usize, v: f64, used: &UsedFeatures, lambda: f64, criterion: Criterion) -> Option<f64> {
        self.raw_gain(f, v, criterion).map(|g| g - used.penalty(f, lambda))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Penalized gain.
    pub gain: f64,
    /// Gain before the feature penalty.
    pub raw_gain: f64,
}

/// Best threshold of one feature over a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FeatureBest {
    pub threshold: f64,
    pub gain: f64,
    pub raw_gain: f64,
}

/// Scan a node's members sorted by `value`, trying every boundary between
/// distinct values with at least `min_leaf` samples on each side. Earlier
/// (lower) thresholds win ties.
#[inline]
pub(crate) fn scan_sorted(
    order: &[u32],
    value: impl Fn(usize) -> f64,
    targets: &[f64],
    total: f64,
    min_leaf: usize,
    penalty: f64,
    criterion: Criterion,
) -> Option<FeatureBest> {
    let m = order.len();
    if m < 2 * min_leaf || m < 2 {
        return None;
    }
    let mut best: Option<FeatureBest> = None;
    let mut sum_left = 0.0;
    let mut prev = value(order[0] as usize);
    for k in 0..m - 1 {
        let i = order[k] as usize;
        sum_left += targets[i];
        let next = value(order[k + 1] as usize);
        let n_left = k + 1;
        let current = prev;
        prev = next;
        if next <= current || n_left < min_leaf || m - n_left < min_leaf {
            continue;
        }
        let raw = split_gain(n_left, sum_left, m - n_left, total - sum_left, criterion);
        let gain = raw - penalty;
        if best.is_none_or(|b| gain > b.gain) {
            best = Some(FeatureBest {
                threshold: midpoint(current, next),
                gain,
                raw_gain: raw,
            });
        }
    }
    best
}

/// Pick the first maximum over features (lowest index on ties).
pub(crate) fn argmax_feature<T>(scores: impl IntoIterator<Item = (usize, Option<T>)>, key: impl Fn(&T) -> f64) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (f, s) in scores {
        if let Some(s) = s {
            if best.as_ref().is_none_or(|(_, b)| key(&s) > key(b)) {
                best = Some((f, s));
            }
        }
    }
    best
}

/// Below this much work per node, features are scanned on the calling thread.
const PARALLEL_WORK: usize = 1 << 14;

pub(crate) fn map_features<T: Send>(d: usize, work: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if work * d >= PARALLEL_WORK {
        (0..d).into_par_iter().map(f).collect()
    } else {
        (0..d).map(f).collect()
    }
}

/// Best penalized split of a node by exhaustive search.
///
/// Returns `None` when the node is too small or the best penalized gain does
/// not exceed `params.min_gain`.
pub fn best_split_single(node: &NodeView<'_>, used: &UsedFeatures, lambda: f64, params: &TreeParams) -> Option<SplitCandidate> {
    let m = node.indices.len();
    if m < 2 * params.min_samples_leaf {
        return None;
    }
    let mut members: Vec<u32> = node.indices.iter().map(|&i| i as u32).collect();
    members.sort_unstable();
    let total: f64 = members.iter().map(|&i| node.targets[i as usize]).sum();
    let d = node.x.cols();
    let per_feature = map_features(d, m, |f| {
        let mut order = members.clone();
        order.sort_by(|&a, &b| node.x.get(a as usize, f).total_cmp(&node.x.get(b as usize, f)));
        scan_sorted(
            &order,
            |i| node.x.get(i, f),
            node.targets,
            total,
            params.min_samples_leaf,
            used.penalty(f, lambda),
            params.criterion,
        )
    });
    argmax_feature(per_feature.into_iter().enumerate(), |b| b.gain)
        .filter(|(_, b)| b.gain > params.min_gain)
        .map(|(feature, b)| SplitCandidate {
            feature,
            threshold: b.threshold,
            gain: b.gain,
            raw_gain: b.raw_gain,
        })
}

/// Column-major copy of a training matrix with every feature presorted.
#[derive(Debug, Clone)]
pub struct SortedFeatures {
    n_rows: usize,
    columns: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
}

impl AsRef<SortedFeatures> for SortedFeatures {
    fn as_ref(&self) -> &SortedFeatures {
        self
    }
}

impl SortedFeatures {
    pub fn new(x: &Matrix) -> Self {
        let columns: Vec<Vec<f64>> = (0..x.cols()).map(|j| x.column(j)).collect();
        let order = columns
            .iter()
            .map(|col| {
                let mut o: Vec<u32> = (0..x.rows() as u32).collect();
                o.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
                o
            })
            .collect();
        SortedFeatures {
            n_rows: x.rows(),
            columns,
            order,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, f: usize) -> &[f64] {
        &self.columns[f]
    }

    pub(crate) fn root(&self) -> NodeLists {
        NodeLists {
            members: (0..self.n_rows as u32).collect(),
            sorted: self.order.clone(),
        }
    }
}

/// A node's members, ascending, and the same members sorted by each feature.
#[derive(Debug, Clone)]
pub(crate) struct NodeLists {
    pub members: Vec<u32>,
    pub sorted: Vec<Vec<u32>>,
}

impl NodeLists {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn sum(&self, targets: &[f64]) -> f64 {
        self.members.iter().map(|&i| targets[i as usize]).sum()
    }

    pub fn mean(&self, targets: &[f64]) -> f64 {
        self.sum(targets) / self.members.len() as f64
    }

    /// Best threshold per feature, `None` for features without a valid split.
    pub fn scan_all(&self, data: &SortedFeatures, targets: &[f64], used: &UsedFeatures, lambda: f64, params: &TreeParams) -> Vec<Option<FeatureBest>> {
        let total = self.sum(targets);
        map_features(data.n_features(), self.len(), |f| self.scan_one(data, targets, total, f, used.penalty(f, lambda), params))
    }

    pub fn scan_one(&self, data: &SortedFeatures, targets: &[f64], total: f64, f: usize, penalty: f64, params: &TreeParams) -> Option<FeatureBest> {
        let col = data.column(f);
        scan_sorted(&self.sorted[f], |i| col[i], targets, total, params.min_samples_leaf, penalty, params.criterion)
    }

    /// Stable partition on `x[f] <= threshold`.
    pub fn split(&self, data: &SortedFeatures, f: usize, threshold: f64) -> (NodeLists, NodeLists) {
        let col = data.column(f);
        let left_of = |i: &u32| col[*i as usize] <= threshold;
        let part = |v: &[u32]| -> (Vec<u32>, Vec<u32>) { v.iter().partition(|i| left_of(i)) };
        let (ml, mr) = part(&self.members);
        let (sl, sr): (Vec<_>, Vec<_>) = self.sorted.iter().map(|s| part(s)).unzip();
        (NodeLists { members: ml, sorted: sl }, NodeLists { members: mr, sorted: sr })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        /// Unpenalized gain realized by this split.
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Regression tree stored as a node array; node 0 is the root and children
/// always follow their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub features_used: BTreeSet<usize>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
            features_used: BTreeSet::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn rec(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + rec(nodes, left).max(rec(nodes, right)),
            }
        }
        rec(&self.nodes, 0)
    }

    /// Route `x` to a leaf (left iff `x[f] <= threshold`). A NaN on a
    /// referenced feature is an error.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return Ok(value),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    let v = *x.get(feature).ok_or_else(|| {
                        BoutsError::data(format!("input has {} features, tree references feature {feature}", x.len()))
                    })?;
                    if v.is_nan() {
                        return Err(BoutsError::data(format!("NaN at feature {feature}")));
                    }
                    i = if v <= threshold { left } else { right };
                }
            }
        }
    }

    #[inline]
    pub(crate) fn predict_column(&self, value: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if value(feature) <= threshold { left } else { right },
            }
        }
    }

    /// Structural checks: children exist and follow their parent, every node
    /// is reachable once, and `features_used` matches the split features.
    pub fn validate(&self) -> Result<()> {
        let mut reached = vec![0usize; self.nodes.len()];
        reached[0] = 1;
        let mut features = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if let Node::Split { feature, left, right, .. } = *n {
                for c in [left, right] {
                    if c <= i || c >= self.nodes.len() {
                        return Err(BoutsError::data(format!("node {i} has invalid child {c}")));
                    }
                    reached[c] += 1;
                }
                features.insert(feature);
            }
        }
        if reached.iter().any(|&r| r != 1) {
            return Err(BoutsError::data("tree nodes are not a single rooted tree"));
        }
        if features != self.features_used {
            return Err(BoutsError::data("features_used does not match split features"));
        }
        Ok(())
    }
}

/// Grow a tree depth-first on `targets` (one per row of `data`).
///
/// `used` holds features the model already paid for. A feature introduced by
/// a split in this tree is free for every later split of the same tree.
pub fn grow_tree(data: &SortedFeatures, targets: &[f64], used: &UsedFeatures, lambda: f64, params: &TreeParams) -> Tree {
    assert_eq!(data.n_rows(), targets.len(), "one target per row");
    let mut grower = Grower {
        data,
        targets,
        used: used.clone(),
        lambda,
        params,
        nodes: Vec::new(),
        features: BTreeSet::new(),
    };
    grower.grow(data.root(), 0);
    Tree {
        nodes: grower.nodes,
        features_used: grower.features,
    }
}

struct Grower<'a> {
    data: &'a SortedFeatures,
    targets: &'a [f64],
    used: UsedFeatures,
    lambda: f64,
    params: &'a TreeParams,
    nodes: Vec<Node>,
    features: BTreeSet<usize>,
}

impl Grower<'_> {
    fn grow(&mut self, node: NodeLists, depth: usize) -> usize {
        let id = self.nodes.len();
        let value = node.mean(self.targets);
        self.nodes.push(Node::Leaf { value });
        if depth >= self.params.max_depth || node.len() < 2 * self.params.min_samples_leaf {
            return id;
        }
        let scans = node.scan_all(self.data, self.targets, &self.used, self.lambda, self.params);
        let Some((feature, best)) =
            argmax_feature(scans.into_iter().enumerate(), |b| b.gain).filter(|(_, b)| b.gain > self.params.min_gain)
        else {
            return id;
        };
        self.used.insert(feature);
        self.features.insert(feature);
        let (l, r) = node.split(self.data, feature, best.threshold);
        drop(node);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold: best.threshold,
            gain: best.raw_gain,
            left,
            right,
        };
        id
    }
}
