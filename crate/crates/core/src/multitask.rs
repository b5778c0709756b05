//! Multitask trees: one topology and one split feature per node shared by all
//! tasks, with a threshold and leaf values per task.
//!
//! A node's feature is chosen by the maximin rule. Each task finds its best
//! penalized gain for a feature on its own data; the feature's score is the
//! smallest of those per-task bests, and the feature with the largest score
//! wins. A feature therefore only enters the model when it helps every task.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{BoutsError, Result};
use crate::trees::{
    argmax_feature, map_features, scan_sorted, FeatureBest, Node, NodeLists, NodeView, SortedFeatures, Tree, TreeParams,
    UsedFeatures,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MultitaskNode {
    Split {
        feature: usize,
        /// One threshold per task.
        thresholds: Vec<f64>,
        /// Unpenalized gain realized in each task.
        gains: Vec<f64>,
        left: usize,
        right: usize,
    },
    Leaf {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultitaskTree {
    pub n_tasks: usize,
    pub nodes: Vec<MultitaskNode>,
    pub features_used: BTreeSet<usize>,
}

impl MultitaskTree {
    pub fn is_leaf(&self) -> bool {
        self.nodes.len() == 1
    }

    /// The single-task tree seen by task `t`.
    pub fn task_tree(&self, t: usize) -> Tree {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match n {
                MultitaskNode::Split {
                    feature,
                    thresholds,
                    gains,
                    left,
                    right,
                } => Node::Split {
                    feature: *feature,
                    threshold: thresholds[t],
                    gain: gains[t],
                    left: *left,
                    right: *right,
                },
                MultitaskNode::Leaf { values } => Node::Leaf { value: values[t] },
            })
            .collect();
        Tree {
            nodes,
            features_used: self.features_used.clone(),
        }
    }

    pub fn predict(&self, t: usize, x: &[f64]) -> Result<f64> {
        if t >= self.n_tasks {
            return Err(BoutsError::data(format!("task index {t} out of range ({} tasks)", self.n_tasks)));
        }
        self.task_tree(t).predict(x)
    }

    #[inline]
    pub(crate) fn predict_column(&self, t: usize, value: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                MultitaskNode::Leaf { values } => return values[t],
                MultitaskNode::Split {
                    feature,
                    thresholds,
                    left,
                    right,
                    ..
                } => i = if value(*feature) <= thresholds[t] { *left } else { *right },
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        for n in &self.nodes {
            let len = match n {
                MultitaskNode::Split { thresholds, gains, .. } => thresholds.len().min(gains.len()),
                MultitaskNode::Leaf { values } => values.len(),
            };
            if len != self.n_tasks {
                return Err(BoutsError::data("multitask node does not carry one entry per task"));
            }
        }
        (0..self.n_tasks).try_for_each(|t| self.task_tree(t).validate())
    }
}

/// Result of the maximin rule at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximinSplit {
    pub feature: usize,
    pub thresholds: Vec<f64>,
    /// Penalized gain per task at its threshold.
    pub gains: Vec<f64>,
    pub raw_gains: Vec<f64>,
    /// Minimum over tasks of the per-task best penalized gain.
    pub score: f64,
}

/// Maximin selection given a per-(task, feature) best-threshold oracle.
fn maximin_with(
    n_tasks: usize,
    n_features: usize,
    work: usize,
    min_gain: f64,
    scan: impl Fn(usize, usize) -> Option<FeatureBest> + Sync + Send,
) -> Option<MaximinSplit> {
    let scores = map_features(n_features, work, |f| {
        let mut worst = f64::INFINITY;
        for t in 0..n_tasks {
            worst = worst.min(scan(t, f)?.gain);
        }
        Some(worst)
    });
    let (feature, score) = argmax_feature(scores.into_iter().enumerate(), |s| *s)?;
    if !(score > min_gain) {
        return None;
    }
    // Thresholds for the winning feature are solved again per task.
    let per_task: Vec<FeatureBest> = (0..n_tasks).map(|t| scan(t, feature)).collect::<Option<_>>()?;
    Some(MaximinSplit {
        feature,
        thresholds: per_task.iter().map(|b| b.threshold).collect(),
        gains: per_task.iter().map(|b| b.gain).collect(),
        raw_gains: per_task.iter().map(|b| b.raw_gain).collect(),
        score,
    })
}

/// Maximin split of a multitask node by exhaustive search.
///
/// `nodes[t]` views task `t`'s rows at this node; all tasks must have the same
/// number of columns. The penalty applies when the feature is not in `used`.
pub fn maximin_split(nodes: &[NodeView<'_>], used: &UsedFeatures, lambda: f64, params: &TreeParams) -> Option<MaximinSplit> {
    let first = nodes.first()?;
    let d = first.x.cols();
    if nodes.iter().any(|n| n.indices.len() < 2 * params.min_samples_leaf || n.x.cols() != d) {
        return None;
    }
    let prepared: Vec<(Vec<u32>, f64)> = nodes
        .iter()
        .map(|n| {
            let mut m: Vec<u32> = n.indices.iter().map(|&i| i as u32).collect();
            m.sort_unstable();
            let total = m.iter().map(|&i| n.targets[i as usize]).sum();
            (m, total)
        })
        .collect();
    let work: usize = nodes.iter().map(|n| n.indices.len()).sum();
    maximin_with(nodes.len(), d, work, params.min_gain, |t, f| {
        let node = &nodes[t];
        let (members, total) = &prepared[t];
        let mut order = members.clone();
        order.sort_by(|&a, &b| node.x.get(a as usize, f).total_cmp(&node.x.get(b as usize, f)));
        scan_sorted(
            &order,
            |i| node.x.get(i, f),
            node.targets,
            *total,
            params.min_samples_leaf,
            used.penalty(f, lambda),
            params.criterion,
        )
    })
}

/// Grow a multitask tree on per-task targets.
///
/// A node becomes a leaf for every task as soon as one task is too small to
/// split or the maximin rule finds nothing above `min_gain`. Features
/// introduced by this tree are free for its later splits.
pub fn grow_multitask_tree<D: AsRef<SortedFeatures>>(
    data: &[D],
    targets: &[&[f64]],
    used: &UsedFeatures,
    lambda: f64,
    params: &TreeParams,
) -> MultitaskTree {
    assert_eq!(data.len(), targets.len(), "one target vector per task");
    assert!(!data.is_empty(), "at least one task");
    let data: Vec<&SortedFeatures> = data.iter().map(AsRef::as_ref).collect();
    let mut grower = MultitaskGrower {
        data: &data,
        targets,
        used: used.clone(),
        lambda,
        params,
        nodes: Vec::new(),
        features: BTreeSet::new(),
    };
    grower.grow(data.iter().map(|d| d.root()).collect(), 0);
    MultitaskTree {
        n_tasks: data.len(),
        nodes: grower.nodes,
        features_used: grower.features,
    }
}

struct MultitaskGrower<'a> {
    data: &'a [&'a SortedFeatures],
    targets: &'a [&'a [f64]],
    used: UsedFeatures,
    lambda: f64,
    params: &'a TreeParams,
    nodes: Vec<MultitaskNode>,
    features: BTreeSet<usize>,
}

impl MultitaskGrower<'_> {
    fn grow(&mut self, lists: Vec<NodeLists>, depth: usize) -> usize {
        let id = self.nodes.len();
        let values = lists.iter().zip(self.targets).map(|(l, y)| l.mean(y)).collect();
        self.nodes.push(MultitaskNode::Leaf { values });
        if depth >= self.params.max_depth || lists.iter().any(|l| l.len() < 2 * self.params.min_samples_leaf) {
            return id;
        }
        let totals: Vec<f64> = lists.iter().zip(self.targets).map(|(l, y)| l.sum(y)).collect();
        let work = lists.iter().map(NodeLists::len).sum();
        let (data, targets, used, lambda, params) = (self.data, self.targets, &self.used, self.lambda, self.params);
        let Some(split) = maximin_with(lists.len(), data[0].n_features(), work, params.min_gain, |t, f| {
            lists[t].scan_one(data[t], targets[t], totals[t], f, used.penalty(f, lambda), params)
        }) else {
            return id;
        };
        self.used.insert(split.feature);
        self.features.insert(split.feature);
        let (left_lists, right_lists): (Vec<_>, Vec<_>) = lists
            .iter()
            .enumerate()
            .map(|(t, l)| l.split(self.data[t], split.feature, split.thresholds[t]))
            .unzip();
        drop(lists);
        let left = self.grow(left_lists, depth + 1);
        let right = self.grow(right_lists, depth + 1);
        self.nodes[id] = MultitaskNode::Split {
            feature: split.feature,
            thresholds: split.thresholds,
            gains: split.raw_gains,
            left,
            right,
        };
        id
    }
}
