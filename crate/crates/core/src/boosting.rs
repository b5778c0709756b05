//! Two-stage boosting on squared error.
//!
//! Stage one fits multitask trees to the residuals of every task at once;
//! the features they use are the universal features. Stage two then boosts
//! each task on its own with ordinary penalized trees, starting from the
//! universal set so that reusing a universal feature costs nothing.
//!
//! Every accepted tree is added with the same weight `learning_rate`, so the
//! number of stored trees is the whole story of the coefficient vector. A
//! round whose tree is a single leaf with value zero for every task adds
//! nothing and ends its stage, since the residuals and the used-feature set
//! the next round would see are unchanged.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::{prepare, MultitaskDataset, SplitAssignment, TaskDataset};
use crate::error::{BoutsError, Result};
use crate::matrix::Matrix;
use crate::multitask::{grow_multitask_tree, MultitaskNode, MultitaskTree};
use crate::par::*;
use crate::trees::{grow_tree, Node, SortedFeatures, Tree, TreeParams, UsedFeatures};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub rounds_universal: usize,
    pub rounds_task: usize,
    pub learning_rate: f64,
    pub lambda_universal: f64,
    /// One penalty for all tasks, or one per task.
    pub lambda_task: Vec<f64>,
    pub tree: TreeParams,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            rounds_universal: 100,
            rounds_task: 100,
            learning_rate: 0.1,
            lambda_universal: 1.0,
            lambda_task: vec![1.0],
            tree: TreeParams::default(),
        }
    }
}

impl BoostConfig {
    /// Same penalty for the universal and every task-specific stage.
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda_universal = lambda;
        self.lambda_task = vec![lambda];
        self
    }

    pub fn lambda_for(&self, task: usize) -> f64 {
        if self.lambda_task.len() == 1 {
            self.lambda_task[0]
        } else {
            self.lambda_task[task]
        }
    }

    pub fn validate(&self, n_tasks: usize) -> Result<()> {
        self.tree.validate()?;
        if self.rounds_universal + self.rounds_task == 0 {
            return Err(BoutsError::config("at least one boosting round is required"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(BoutsError::config("learning rate must be in (0, 1]"));
        }
        if self.lambda_task.len() != 1 && self.lambda_task.len() != n_tasks {
            return Err(BoutsError::config(format!(
                "lambda_task needs 1 or {n_tasks} values, got {}",
                self.lambda_task.len()
            )));
        }
        let penalties = std::iter::once(self.lambda_universal).chain(self.lambda_task.iter().copied());
        if penalties.into_iter().any(|l| !(l >= 0.0 && l.is_finite())) {
            return Err(BoutsError::config("penalties must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Fitted two-stage model. Predictions are in the units of the training
/// targets (standardized when fitted through [`BoutsModel::fit_split`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoutsModel {
    pub feature_names: Vec<String>,
    pub task_names: Vec<String>,
    pub learning_rate: f64,
    /// Constant starting prediction per task.
    pub init: Vec<f64>,
    pub universal_trees: Vec<MultitaskTree>,
    pub task_trees: Vec<Vec<Tree>>,
    pub universal_used: BTreeSet<usize>,
    /// Features used by each task's stage-two trees, universal ones included.
    pub task_used: Vec<BTreeSet<usize>>,
}

impl BoutsModel {
    /// Fit on per-task training data sharing one feature order.
    pub fn fit(train: &[TaskDataset], config: &BoostConfig) -> Result<Self> {
        Ok(Trainer::new(train, config)?.run())
    }

    /// Standardize each task on its training partition, then fit.
    pub fn fit_split(dataset: &MultitaskDataset, split: &SplitAssignment, config: &BoostConfig) -> Result<Self> {
        let prepared = prepare(dataset, split)?;
        let train: Vec<TaskDataset> = prepared.into_iter().map(|p| p.train).collect();
        Self::fit(&train, config)
    }

    pub fn n_tasks(&self) -> usize {
        self.task_names.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn task_index(&self, name: &str) -> Option<usize> {
        self.task_names.iter().position(|n| n == name)
    }

    fn check_task(&self, t: usize) -> Result<()> {
        if t >= self.n_tasks() {
            return Err(BoutsError::data(format!("task index {t} out of range ({} tasks)", self.n_tasks())));
        }
        Ok(())
    }

    /// Prediction for one row.
    pub fn predict_row(&self, t: usize, x: &[f64]) -> Result<f64> {
        self.check_task(t)?;
        if x.len() != self.n_features() {
            return Err(BoutsError::data(format!(
                "expected {} features, got {}",
                self.n_features(),
                x.len()
            )));
        }
        if let Some(j) = x.iter().position(|v| v.is_nan()) {
            return Err(BoutsError::data(format!("NaN in feature '{}'", self.feature_names[j])));
        }
        let mut pred = self.init[t];
        for tree in &self.universal_trees {
            pred += self.learning_rate * tree.predict_column(t, |f| x[f]);
        }
        for tree in &self.task_trees[t] {
            pred += self.learning_rate * tree.predict_column(|f| x[f]);
        }
        Ok(pred)
    }

    pub fn predict(&self, t: usize, x: &Matrix) -> Result<Vec<f64>> {
        self.check_task(t)?;
        if x.cols() != self.n_features() {
            return Err(BoutsError::data(format!(
                "expected {} feature columns, got {}",
                self.n_features(),
                x.cols()
            )));
        }
        (0..x.rows()).map(|i| self.predict_row(t, x.row(i))).collect()
    }

    /// Align a task's columns to the model by name, then predict.
    pub fn predict_named(&self, t: usize, task: &TaskDataset) -> Result<Vec<f64>> {
        let pos: BTreeMap<&str, usize> = task
            .feature_names
            .iter()
            .enumerate()
            .map(|(j, n)| (n.as_str(), j))
            .collect();
        let idx = self
            .feature_names
            .iter()
            .map(|n| {
                pos.get(n.as_str())
                    .copied()
                    .ok_or_else(|| BoutsError::data(format!("missing feature column '{n}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.predict(t, &task.x.select_columns(&idx))
    }

    fn names(&self, idx: impl IntoIterator<Item = usize>) -> Vec<String> {
        let mut v: Vec<String> = idx.into_iter().map(|j| self.feature_names[j].clone()).collect();
        v.sort();
        v
    }

    pub fn universal_indices(&self) -> BTreeSet<usize> {
        self.universal_used.clone()
    }

    /// Stage-two features of task `t` that are not universal.
    pub fn task_specific_indices(&self, t: usize) -> BTreeSet<usize> {
        self.task_used[t].difference(&self.universal_used).copied().collect()
    }

    /// Universal feature names, sorted.
    pub fn universal_features(&self) -> Vec<String> {
        self.names(self.universal_used.iter().copied())
    }

    /// Task-specific feature names of task `t`, sorted.
    pub fn task_specific_features(&self, t: usize) -> Vec<String> {
        self.names(self.task_specific_indices(t))
    }

    /// Universal plus task-specific features of `t`, as column indices.
    pub fn selected_indices(&self, t: usize) -> Vec<usize> {
        self.universal_used.union(&self.task_used[t]).copied().collect()
    }

    /// Share of the total unpenalized split gain of task `t` attributed to
    /// each feature, over its universal and task-specific trees.
    pub fn feature_importances(&self, t: usize) -> BTreeMap<String, f64> {
        let mut totals: BTreeMap<usize, f64> = BTreeMap::new();
        for tree in &self.universal_trees {
            for n in &tree.nodes {
                if let MultitaskNode::Split { feature, gains, .. } = n {
                    *totals.entry(*feature).or_default() += gains[t];
                }
            }
        }
        for tree in &self.task_trees[t] {
            for n in &tree.nodes {
                if let Node::Split { feature, gain, .. } = *n {
                    *totals.entry(feature).or_default() += gain;
                }
            }
        }
        let sum: f64 = totals.values().sum();
        if !(sum > 0.0) {
            return BTreeMap::new();
        }
        totals
            .into_iter()
            .map(|(f, g)| (self.feature_names[f].clone(), g / sum))
            .collect()
    }
}

/// Per-task training MSE after every accepted round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub initial: Vec<f64>,
    /// One entry per accepted universal round, holding every task's MSE.
    pub universal: Vec<Vec<f64>>,
    /// Per task, one entry per accepted task-specific round.
    pub task: Vec<Vec<f64>>,
}

impl TrainingTrace {
    /// Full MSE sequence of task `t` across both stages.
    pub fn sequence(&self, t: usize) -> Vec<f64> {
        let mut s = vec![self.initial[t]];
        s.extend(self.universal.iter().map(|r| r[t]));
        s.extend(self.task[t].iter().copied());
        s
    }
}

struct TaskState {
    sorted: SortedFeatures,
    residuals: Vec<f64>,
}

impl TaskState {
    fn mse(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum::<f64>() / self.residuals.len() as f64
    }
}

/// Step-wise fitting state. [`Trainer::run`] performs the whole schedule;
/// the step methods expose single rounds.
pub struct Trainer {
    config: BoostConfig,
    tasks: Vec<TaskState>,
    model: BoutsModel,
    universal_done: usize,
    trace: TrainingTrace,
}

impl Trainer {
    pub fn new(train: &[TaskDataset], config: &BoostConfig) -> Result<Self> {
        let first = train.first().ok_or_else(|| BoutsError::data("no tasks to fit"))?;
        config.validate(train.len())?;
        for t in train {
            t.validate()?;
            if t.n_samples() == 0 {
                return Err(BoutsError::data(format!("task '{}': empty training partition", t.name)));
            }
            if t.feature_names != first.feature_names {
                return Err(BoutsError::data(format!(
                    "task '{}' does not share the feature columns of '{}'",
                    t.name, first.name
                )));
            }
        }
        let tasks: Vec<TaskState> = train
            .par_iter()
            .map(|t| TaskState {
                sorted: SortedFeatures::new(&t.x),
                residuals: t.y.clone(),
            })
            .collect();
        let n = train.len();
        let trace = TrainingTrace {
            initial: tasks.iter().map(TaskState::mse).collect(),
            universal: Vec::new(),
            task: vec![Vec::new(); n],
        };
        Ok(Trainer {
            config: config.clone(),
            model: BoutsModel {
                feature_names: first.feature_names.clone(),
                task_names: train.iter().map(|t| t.name.clone()).collect(),
                learning_rate: config.learning_rate,
                init: vec![0.0; n],
                universal_trees: Vec::new(),
                task_trees: vec![Vec::new(); n],
                universal_used: BTreeSet::new(),
                task_used: vec![BTreeSet::new(); n],
            },
            tasks,
            universal_done: 0,
            trace,
        })
    }

    pub fn model(&self) -> &BoutsModel {
        &self.model
    }

    pub fn trace(&self) -> &TrainingTrace {
        &self.trace
    }

    pub fn residuals(&self, t: usize) -> &[f64] {
        &self.tasks[t].residuals
    }

    pub fn training_mse(&self, t: usize) -> f64 {
        self.tasks[t].mse()
    }

    /// Grow one multitask tree on the current residuals. Returns `false`
    /// (and changes nothing) if the tree is a null leaf.
    pub fn step_universal(&mut self) -> bool {
        let used: UsedFeatures = self.model.universal_used.iter().copied().collect();
        let sorted: Vec<&SortedFeatures> = self.tasks.iter().map(|s| &s.sorted).collect();
        let residuals: Vec<&[f64]> = self.tasks.iter().map(|s| s.residuals.as_slice()).collect();
        let tree = grow_multitask_tree(&sorted, &residuals, &used, self.config.lambda_universal, &self.config.tree);
        if let [MultitaskNode::Leaf { values }] = tree.nodes.as_slice() {
            if values.iter().all(|v| is_null(*v)) {
                return false;
            }
        }
        let beta = self.config.learning_rate;
        for (t, state) in self.tasks.iter_mut().enumerate() {
            apply(&mut state.residuals, beta, |i| tree.predict_column(t, |f| state.sorted.column(f)[i]));
        }
        self.model.universal_used.extend(tree.features_used.iter().copied());
        self.model.universal_trees.push(tree);
        self.trace.universal.push(self.tasks.iter().map(TaskState::mse).collect());
        true
    }

    /// One task-specific round for task `t`.
    pub fn step_task(&mut self, t: usize) -> bool {
        let mut used: UsedFeatures = self.model.universal_used.iter().copied().collect();
        used.extend(self.model.task_used[t].iter().copied());
        let state = &mut self.tasks[t];
        match task_round(state, &used, self.config.lambda_for(t), &self.config.tree, self.config.learning_rate) {
            Some(tree) => {
                self.model.task_used[t].extend(tree.features_used.iter().copied());
                self.model.task_trees[t].push(tree);
                self.trace.task[t].push(state.mse());
                true
            }
            None => false,
        }
    }

    /// Run the remaining universal rounds, then every task's rounds.
    pub fn run(self) -> BoutsModel {
        self.run_traced().0
    }

    pub fn run_traced(mut self) -> (BoutsModel, TrainingTrace) {
        while self.universal_done < self.config.rounds_universal {
            self.universal_done += 1;
            if !self.step_universal() {
                self.universal_done = self.config.rounds_universal;
            }
        }
        let Trainer {
            config,
            tasks,
            mut model,
            mut trace,
            ..
        } = self;
        let universal = model.universal_used.clone();
        let already = model.task_used.clone();
        let results: Vec<(Vec<Tree>, BTreeSet<usize>, Vec<f64>)> = tasks
            .into_par_iter()
            .enumerate()
            .map(|(t, mut state)| {
                let mut used: UsedFeatures = universal.iter().chain(&already[t]).copied().collect();
                let mut trees = Vec::new();
                let mut features = BTreeSet::new();
                let mut mse = Vec::new();
                for _ in 0..config.rounds_task {
                    let Some(tree) = task_round(&mut state, &used, config.lambda_for(t), &config.tree, config.learning_rate)
                    else {
                        break;
                    };
                    used.extend(tree.features_used.iter().copied());
                    features.extend(tree.features_used.iter().copied());
                    trees.push(tree);
                    mse.push(state.mse());
                }
                (trees, features, mse)
            })
            .collect();
        for (t, (trees, features, mse)) in results.into_iter().enumerate() {
            model.task_trees[t].extend(trees);
            model.task_used[t].extend(features);
            trace.task[t].extend(mse);
        }
        (model, trace)
    }
}

fn task_round(state: &mut TaskState, used: &UsedFeatures, lambda: f64, params: &TreeParams, beta: f64) -> Option<Tree> {
    let tree = grow_tree(&state.sorted, &state.residuals, used, lambda, params);
    if let [Node::Leaf { value }] = tree.nodes.as_slice() {
        if is_null(*value) {
            return None;
        }
    }
    let sorted = &state.sorted;
    apply(&mut state.residuals, beta, |i| tree.predict_column(|f| sorted.column(f)[i]));
    Some(tree)
}

/// Leaf values this small are rounding noise of a zero-mean residual.
fn is_null(v: f64) -> bool {
    v.abs() <= 1e-12
}

fn apply(residuals: &mut [f64], beta: f64, predict: impl Fn(usize) -> f64) {
    for (i, r) in residuals.iter_mut().enumerate() {
        *r -= beta * predict(i);
    }
}

/// Plain single-task gradient boosting (no universal stage) on each task.
pub fn fit_independent(train: &[TaskDataset], config: &BoostConfig) -> Result<BoutsModel> {
    let config = BoostConfig {
        rounds_universal: 0,
        ..config.clone()
    };
    BoutsModel::fit(train, &config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::Criterion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn task(name: &str, columns: Vec<Vec<f64>>, y: Vec<f64>) -> TaskDataset {
        let d = columns.len();
        let n = y.len();
        TaskDataset::new(
            name,
            (0..d).map(|j| format!("f{j}")).collect(),
            Matrix::from_columns(&columns).unwrap(),
            y,
            (0..n).map(|i| format!("{name}{i}")).collect(),
        )
        .unwrap()
    }

    fn random_task(name: &str, seed: u64, n: usize, d: usize, f: impl Fn(&[f64]) -> f64) -> TaskDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y = rows.iter().map(|r| f(r) + 0.1 * rng.random_range(-1.0..1.0)).collect();
        let columns = (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        task(name, columns, y)
    }

    fn stump_params() -> TreeParams {
        TreeParams {
            max_depth: 1,
            min_samples_leaf: 1,
            min_gain: 0.0,
            criterion: Criterion::Variance,
        }
    }

    fn two_tasks() -> Vec<TaskDataset> {
        vec![
            random_task("a", 1, 80, 4, |x| x[0] + 0.5 * x[1]),
            random_task("b", 2, 60, 4, |x| -x[0] + 0.5 * x[2]),
        ]
    }

    #[test]
    fn stump_prediction_is_scaled_by_learning_rate() {
        let t = task("a", vec![vec![1.0, 2.0, 3.0, 4.0]], vec![0.0, 0.0, 1.0, 1.0]);
        let config = BoostConfig {
            rounds_universal: 0,
            rounds_task: 1,
            tree: stump_params(),
            ..BoostConfig::default().with_lambda(0.0)
        };
        let model = BoutsModel::fit(std::slice::from_ref(&t), &config).unwrap();
        let pred = model.predict(0, &t.x).unwrap();
        assert_eq!(pred, vec![0.0, 0.0, 0.1, 0.1]);
        assert_eq!(model.feature_importances(0).get("f0"), Some(&1.0));
    }

    #[test]
    fn model_without_trees_predicts_zero() {
        let t = task("a", vec![vec![1.0, 2.0, 3.0]], vec![0.0; 3]);
        let model = BoutsModel::fit(std::slice::from_ref(&t), &BoostConfig::default()).unwrap();
        assert!(model.universal_trees.is_empty() && model.task_trees[0].is_empty());
        assert_eq!(model.predict(0, &t.x).unwrap(), vec![0.0; 3]);
        assert!(model.universal_features().is_empty());
        assert!(model.feature_importances(0).is_empty());
    }

    #[test]
    fn residuals_track_predictions_every_round() {
        let tasks = two_tasks();
        let config = BoostConfig {
            rounds_universal: 5,
            rounds_task: 5,
            ..BoostConfig::default().with_lambda(0.01)
        };
        let mut trainer = Trainer::new(&tasks, &config).unwrap();
        let check = |trainer: &Trainer| {
            for (t, task) in tasks.iter().enumerate() {
                let pred = trainer.model().predict(t, &task.x).unwrap();
                for ((r, y), p) in trainer.residuals(t).iter().zip(&task.y).zip(&pred) {
                    assert!((r - (y - p)).abs() < 1e-9);
                }
            }
        };
        for _ in 0..5 {
            trainer.step_universal();
            check(&trainer);
        }
        for t in 0..2 {
            for _ in 0..5 {
                trainer.step_task(t);
                check(&trainer);
            }
        }
    }

    #[test]
    fn training_mse_never_increases() {
        let config = BoostConfig {
            rounds_universal: 30,
            rounds_task: 30,
            ..BoostConfig::default().with_lambda(0.05)
        };
        let (model, trace) = Trainer::new(&two_tasks(), &config).unwrap().run_traced();
        for t in 0..2 {
            let seq = trace.sequence(t);
            assert_eq!(seq.len(), 1 + model.universal_trees.len() + model.task_trees[t].len());
            assert!(seq.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{seq:?}");
            assert!(seq.last().unwrap() < &seq[0]);
        }
    }

    #[test]
    fn universal_features_were_introduced_with_positive_gain_everywhere() {
        let lambda = 0.2;
        let config = BoostConfig {
            rounds_universal: 40,
            rounds_task: 0,
            ..BoostConfig::default().with_lambda(lambda)
        };
        let model = BoutsModel::fit(&two_tasks(), &config).unwrap();
        assert!(!model.universal_used.is_empty());
        let mut used = BTreeSet::new();
        for tree in &model.universal_trees {
            for n in &tree.nodes {
                if let MultitaskNode::Split { feature, gains, .. } = n {
                    if used.insert(*feature) {
                        assert!(gains.iter().all(|g| g - lambda > config.tree.min_gain), "{gains:?}");
                    }
                }
            }
        }
        assert_eq!(used, model.universal_used);
    }

    #[test]
    fn reporting_is_disjoint_and_l1_mass_matches_round_count() {
        let config = BoostConfig {
            rounds_universal: 12,
            rounds_task: 20,
            ..BoostConfig::default().with_lambda(0.05)
        };
        let model = BoutsModel::fit(&two_tasks(), &config).unwrap();
        let union: BTreeSet<usize> = model.universal_trees.iter().flat_map(|t| t.features_used.iter().copied()).collect();
        assert_eq!(union, model.universal_used);
        assert_eq!(model.universal_trees.len(), 12);
        let l1 = model.learning_rate * model.universal_trees.len() as f64;
        assert!((l1 - 1.2).abs() < 1e-12);
        for t in 0..2 {
            let u: BTreeSet<String> = model.universal_features().into_iter().collect();
            assert!(model.task_specific_features(t).iter().all(|f| !u.contains(f)));
        }
    }

    #[test]
    fn no_universal_rounds_is_independent_boosting() {
        let tasks = two_tasks();
        let config = BoostConfig {
            rounds_universal: 0,
            rounds_task: 15,
            ..BoostConfig::default().with_lambda(0.1)
        };
        let joint = BoutsModel::fit(&tasks, &config).unwrap();
        for (t, task) in tasks.iter().enumerate() {
            let alone = BoutsModel::fit(std::slice::from_ref(task), &config).unwrap();
            assert_eq!(joint.task_trees[t], alone.task_trees[0]);
        }
        assert!(joint.universal_features().is_empty());
    }

    #[test]
    fn single_task_universal_stage_matches_single_task_boosting() {
        let t = random_task("a", 9, 70, 3, |x| x[0] * x[1] + x[2]);
        let multi = BoostConfig {
            rounds_universal: 20,
            rounds_task: 0,
            ..BoostConfig::default().with_lambda(0.02)
        };
        let single = BoostConfig {
            rounds_universal: 0,
            rounds_task: 20,
            ..multi.clone()
        };
        let a = BoutsModel::fit(std::slice::from_ref(&t), &multi).unwrap();
        let b = BoutsModel::fit(std::slice::from_ref(&t), &single).unwrap();
        assert_eq!(a.predict(0, &t.x).unwrap(), b.predict(0, &t.x).unwrap());
        for (mt, st) in a.universal_trees.iter().zip(&b.task_trees[0]) {
            assert_eq!(&mt.task_tree(0), st);
        }
    }

    #[test]
    fn shared_signal_becomes_universal() {
        let tasks = vec![
            random_task("a", 3, 100, 5, |x| 2.0 * x[0] + 0.3 * x[3]),
            random_task("b", 4, 100, 5, |x| 2.0 * x[0] - 0.3 * x[4]),
        ];
        let config = BoostConfig {
            rounds_universal: 10,
            rounds_task: 10,
            ..BoostConfig::default().with_lambda(3.0)
        };
        let model = BoutsModel::fit(&tasks, &config).unwrap();
        assert_eq!(model.universal_features(), vec!["f0"]);
    }

    #[test]
    fn importances_split_gain_shares() {
        let stump = |feature: usize, gain: f64| Tree {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold: 0.0,
                    gain,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: -1.0 },
                Node::Leaf { value: 1.0 },
            ],
            features_used: [feature].into(),
        };
        let model = BoutsModel {
            feature_names: vec!["a".into(), "b".into()],
            task_names: vec!["t".into()],
            learning_rate: 0.1,
            init: vec![0.0],
            universal_trees: Vec::new(),
            task_trees: vec![vec![stump(0, 3.0), stump(1, 1.0)]],
            universal_used: BTreeSet::new(),
            task_used: vec![[0, 1].into()],
        };
        let imp = model.feature_importances(0);
        assert_eq!(imp["a"], 0.75);
        assert_eq!(imp["b"], 0.25);
        assert_eq!(model.task_specific_features(0), vec!["a", "b"]);
    }

    #[test]
    fn shares_sum_to_one() {
        let model = BoutsModel::fit(&two_tasks(), &BoostConfig::default().with_lambda(0.05)).unwrap();
        for t in 0..2 {
            let s: f64 = model.feature_importances(t).values().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn prediction_checks_columns() {
        let tasks = two_tasks();
        let model = BoutsModel::fit(&tasks, &BoostConfig::default()).unwrap();
        let narrow = tasks[0].select_columns(&[0, 1, 2]);
        assert!(model.predict(0, &narrow.x).is_err());
        let err = model.predict_named(0, &narrow).unwrap_err();
        assert!(err.to_string().contains("f3"));
        let shuffled = tasks[0].select_columns(&[3, 1, 0, 2]);
        assert_eq!(model.predict_named(0, &shuffled).unwrap(), model.predict(0, &tasks[0].x).unwrap());
    }

    #[test]
    fn empty_partition_and_bad_config_are_rejected() {
        let t = task("a", vec![vec![]], vec![]);
        assert!(BoutsModel::fit(&[t], &BoostConfig::default()).is_err());
        let bad = BoostConfig {
            learning_rate: 0.0,
            ..BoostConfig::default()
        };
        assert!(BoutsModel::fit(&two_tasks(), &bad).is_err());
        let bad = BoostConfig {
            lambda_task: vec![1.0, 2.0, 3.0],
            ..BoostConfig::default()
        };
        assert!(BoutsModel::fit(&two_tasks(), &bad).is_err());
    }
}
