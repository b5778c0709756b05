//! Task datasets, CSV ingestion, pruning, category construction, the
//! overlap-aware split and per-task standardization.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BoutsError, Result};
use crate::matrix::Matrix;

/// One task: a feature matrix with a target and a unique id per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub x: Matrix,
    pub y: Vec<f64>,
    pub sample_ids: Vec<String>,
}

impl TaskDataset {
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        x: Matrix,
        y: Vec<f64>,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        let ds = TaskDataset {
            name: name.into(),
            feature_names,
            x,
            y,
            sample_ids,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.rows();
        if self.y.len() != n || self.sample_ids.len() != n {
            return Err(BoutsError::data(format!(
                "task '{}': {} rows, {} targets, {} sample ids",
                self.name,
                n,
                self.y.len(),
                self.sample_ids.len()
            )));
        }
        if self.feature_names.len() != self.x.cols() {
            return Err(BoutsError::data(format!(
                "task '{}': {} feature names for {} columns",
                self.name,
                self.feature_names.len(),
                self.x.cols()
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &self.sample_ids {
            if !seen.insert(id.as_str()) {
                return Err(BoutsError::data(format!(
                    "task '{}': duplicate sample id \"{id}\"",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.x.rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    /// Subset of rows, keeping names.
    pub fn select_rows(&self, idx: &[usize]) -> TaskDataset {
        TaskDataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            sample_ids: idx.iter().map(|&i| self.sample_ids[i].clone()).collect(),
        }
    }

    /// Subset of columns by index, keeping rows.
    pub fn select_columns(&self, idx: &[usize]) -> TaskDataset {
        TaskDataset {
            name: self.name.clone(),
            feature_names: idx.iter().map(|&j| self.feature_names[j].clone()).collect(),
            x: self.x.select_columns(idx),
            y: self.y.clone(),
            sample_ids: self.sample_ids.clone(),
        }
    }

    /// Drop every column that contains a NaN or is constant.
    pub fn prune_features(self) -> Result<TaskDataset> {
        let keep: Vec<usize> = (0..self.x.cols())
            .filter(|&j| {
                let col = self.x.column(j);
                if col.iter().any(|v| v.is_nan()) {
                    return false;
                }
                col.first().is_some_and(|first| col.iter().any(|v| v != first))
            })
            .collect();
        if keep.is_empty() {
            return Err(BoutsError::data(format!(
                "task '{}': no usable features after pruning",
                self.name
            )));
        }
        Ok(self.select_columns(&keep))
    }

    /// Write as CSV: id column, features, target column `y`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        let mut header = Vec::with_capacity(self.n_features() + 2);
        header.push("id".to_string());
        header.extend(self.feature_names.iter().cloned());
        header.push("y".to_string());
        w.write_record(&header)?;
        for i in 0..self.n_samples() {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(self.sample_ids[i].clone());
            rec.extend(self.x.row(i).iter().map(|v| format_value(*v)));
            rec.push(format_value(self.y[i]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v}")
    }
}

fn parse_cell(raw: &str) -> Option<f64> {
    let s = raw.trim();
    if s.is_empty() || s == "NaN" {
        return Some(f64::NAN);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => None,
    }
}

/// Read a task CSV: header row, sample id first, target last, features in
/// between. Empty cells and `NaN` become NaN in the feature matrix; the
/// target must be defined everywhere.
pub fn load_task_csv(path: impl AsRef<Path>, name: &str) -> Result<TaskDataset> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let header = reader.headers()?.clone();
    if header.len() < 3 {
        return Err(BoutsError::Parse {
            path: display,
            line: 1,
            column: header.len(),
            message: "need an id column, at least one feature and a target".into(),
        });
    }
    let n_feat = header.len() - 2;
    let feature_names: Vec<String> = header.iter().skip(1).take(n_feat).map(str::to_string).collect();

    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut y = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = rec[0].trim().to_string();
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(BoutsError::Parse {
                path: display,
                line,
                column: 1,
                message: format!("duplicate sample id \"{id}\" (first seen on line {first})"),
            });
        }
        for j in 0..n_feat {
            let cell = &rec[j + 1];
            let v = parse_cell(cell).ok_or_else(|| BoutsError::Parse {
                path: display.clone(),
                line,
                column: j + 2,
                message: format!("non-numeric value {cell:?} for feature '{}'", feature_names[j]),
            })?;
            values.push(v);
        }
        let cell = &rec[n_feat + 1];
        let target = parse_cell(cell)
            .filter(|v| !v.is_nan())
            .ok_or_else(|| BoutsError::Parse {
                path: display.clone(),
                line,
                column: n_feat + 2,
                message: format!("target must be a finite number, got {cell:?}"),
            })?;
        y.push(target);
        ids.push(id);
    }
    let x = Matrix::new(ids.len(), n_feat, values)?;
    TaskDataset::new(name, feature_names, x, y, ids)
}

/// Tasks restricted to a common candidate feature set, in one column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultitaskDataset {
    pub tasks: Vec<TaskDataset>,
    pub candidate_features: Vec<String>,
}

impl MultitaskDataset {
    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn n_features(&self) -> usize {
        self.candidate_features.len()
    }

    pub fn task_names(&self) -> Vec<String> {
        self.tasks.iter().map(|t| t.name.clone()).collect()
    }

    pub fn task_index(&self, name: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.name == name)
    }
}

/// Intersect the (already pruned) tasks' features. Columns follow the first
/// task's order.
pub fn build_category(tasks: Vec<TaskDataset>) -> Result<MultitaskDataset> {
    let first = tasks
        .first()
        .ok_or_else(|| BoutsError::data("a category needs at least one task"))?;
    let others: Vec<HashSet<&str>> = tasks[1..]
        .iter()
        .map(|t| t.feature_names.iter().map(String::as_str).collect())
        .collect();
    let candidate: Vec<String> = first
        .feature_names
        .iter()
        .filter(|f| others.iter().all(|s| s.contains(f.as_str())))
        .cloned()
        .collect();
    if candidate.is_empty() {
        return Err(BoutsError::data("tasks share no usable features"));
    }
    let tasks = tasks
        .into_iter()
        .map(|t| {
            let pos: HashMap<&str, usize> = t
                .feature_names
                .iter()
                .enumerate()
                .map(|(j, f)| (f.as_str(), j))
                .collect();
            let idx: Vec<usize> = candidate.iter().map(|f| pos[f.as_str()]).collect();
            t.select_columns(&idx)
        })
        .collect();
    Ok(MultitaskDataset {
        tasks,
        candidate_features: candidate,
    })
}

/// Task name → CSV path, in file order. Relative paths are resolved against
/// the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<IndexMap<String, PathBuf>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let raw: IndexMap<String, PathBuf> = serde_json::from_str(&text)?;
    if raw.is_empty() {
        return Err(BoutsError::data(format!("{}: manifest lists no tasks", path.display())));
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    Ok(raw
        .into_iter()
        .map(|(k, p)| {
            let p = if p.is_relative() { base.join(p) } else { p };
            (k, p)
        })
        .collect())
}

/// Load, prune and intersect every task named in a manifest.
pub fn load_category(manifest: impl AsRef<Path>) -> Result<MultitaskDataset> {
    let tasks = read_manifest(manifest)?
        .into_iter()
        .map(|(name, path)| load_task_csv(&path, &name)?.prune_features())
        .collect::<Result<Vec<_>>>()?;
    build_category(tasks)
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.7,
            val: 0.2,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(BoutsError::config("split ratios must be positive"));
        }
        if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(BoutsError::config("split ratios must sum to 1"));
        }
        Ok(())
    }

    /// Largest-remainder allocation of `n` items; ties go to the earlier
    /// partition.
    pub fn allocate(&self, n: usize) -> [usize; 3] {
        let quotas = [self.train * n as f64, self.val * n as f64, self.test * n as f64];
        let mut counts = quotas.map(|q| q.floor() as usize);
        let assigned: usize = counts.iter().sum();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let fa = quotas[a] - quotas[a].floor();
            let fb = quotas[b] - quotas[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for k in 0..n.saturating_sub(assigned) {
            counts[order[k % 3]] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

/// Row indices of one task in each partition, ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl TaskSplit {
    pub fn get(&self, p: Partition) -> &[usize] {
        match p {
            Partition::Train => &self.train,
            Partition::Val => &self.val,
            Partition::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub seed: u64,
    pub tasks: Vec<TaskSplit>,
}

/// JSON layout of a split: task → partition → sample ids.
pub type SplitIds = IndexMap<String, BTreeMap<Partition, Vec<String>>>;

impl SplitAssignment {
    pub fn to_ids(&self, tasks: &[TaskDataset]) -> SplitIds {
        tasks
            .iter()
            .zip(&self.tasks)
            .map(|(t, s)| {
                let ids = |idx: &[usize]| idx.iter().map(|&i| t.sample_ids[i].clone()).collect();
                let mut m = BTreeMap::new();
                m.insert(Partition::Train, ids(&s.train));
                m.insert(Partition::Val, ids(&s.val));
                m.insert(Partition::Test, ids(&s.test));
                (t.name.clone(), m)
            })
            .collect()
    }

    pub fn to_json(&self, tasks: &[TaskDataset]) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_ids(tasks))?)
    }

    pub fn from_ids(ids: &SplitIds, tasks: &[TaskDataset], seed: u64) -> Result<Self> {
        let splits = tasks
            .iter()
            .map(|t| {
                let parts = ids
                    .get(&t.name)
                    .ok_or_else(|| BoutsError::data(format!("split has no entry for task '{}'", t.name)))?;
                let pos: HashMap<&str, usize> =
                    t.sample_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
                let lookup = |p: Partition| -> Result<Vec<usize>> {
                    let mut v = parts
                        .get(&p)
                        .map(|list| {
                            list.iter()
                                .map(|s| {
                                    pos.get(s.as_str()).copied().ok_or_else(|| {
                                        BoutsError::data(format!("unknown sample id \"{s}\" in task '{}'", t.name))
                                    })
                                })
                                .collect::<Result<Vec<_>>>()
                        })
                        .transpose()?
                        .unwrap_or_default();
                    v.sort_unstable();
                    Ok(v)
                };
                let split = TaskSplit {
                    train: lookup(Partition::Train)?,
                    val: lookup(Partition::Val)?,
                    test: lookup(Partition::Test)?,
                };
                if split.train.len() + split.val.len() + split.test.len() != t.n_samples() {
                    return Err(BoutsError::data(format!(
                        "split for task '{}' does not cover every sample exactly once",
                        t.name
                    )));
                }
                Ok(split)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SplitAssignment { seed, tasks: splits })
    }
}

/// Split every task so that a sample id shared by several tasks lands in the
/// same partition everywhere.
///
/// Ids are grouped by the exact set of tasks that contain them; each group is
/// shuffled with the seed and allocated by largest remainder.
pub fn overlap_split(tasks: &[TaskDataset], ratios: SplitRatios, seed: u64) -> Result<SplitAssignment> {
    ratios.validate()?;
    let mut membership: HashMap<&str, Vec<usize>> = HashMap::new();
    for (t, task) in tasks.iter().enumerate() {
        for id in &task.sample_ids {
            membership.entry(id.as_str()).or_default().push(t);
        }
    }
    let mut cells: BTreeMap<Vec<usize>, Vec<&str>> = BTreeMap::new();
    for (id, sig) in membership {
        cells.entry(sig).or_default().push(id);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut label: HashMap<&str, Partition> = HashMap::new();
    for ids in cells.values_mut() {
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        let [n_train, n_val, _] = ratios.allocate(ids.len());
        for (k, id) in ids.iter().enumerate() {
            let p = if k < n_train {
                Partition::Train
            } else if k < n_train + n_val {
                Partition::Val
            } else {
                Partition::Test
            };
            label.insert(id, p);
        }
    }

    let splits = tasks
        .iter()
        .map(|task| {
            let mut s = TaskSplit::default();
            for (i, id) in task.sample_ids.iter().enumerate() {
                match label[id.as_str()] {
                    Partition::Train => s.train.push(i),
                    Partition::Val => s.val.push(i),
                    Partition::Test => s.test.push(i),
                }
            }
            s
        })
        .collect();
    Ok(SplitAssignment { seed, tasks: splits })
}

/// Per-column and target mean/std from a task's training rows (population
/// standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl Standardizer {
    pub fn fit(task: &TaskDataset, train_idx: &[usize]) -> Result<Self> {
        if train_idx.is_empty() {
            return Err(BoutsError::data(format!("task '{}': empty training partition", task.name)));
        }
        let mut x_mean = Vec::with_capacity(task.n_features());
        let mut x_std = Vec::with_capacity(task.n_features());
        for j in 0..task.n_features() {
            let (m, s) = mean_std(train_idx.iter().map(|&i| task.x.get(i, j)));
            if !(s > 0.0 && s.is_finite()) {
                return Err(BoutsError::numerical(format!(
                    "task '{}': feature '{}' has zero standard deviation on the training partition",
                    task.name, task.feature_names[j]
                )));
            }
            x_mean.push(m);
            x_std.push(s);
        }
        let (y_mean, y_std) = mean_std(train_idx.iter().map(|&i| task.y[i]));
        if !(y_std > 0.0 && y_std.is_finite()) {
            return Err(BoutsError::numerical(format!(
                "task '{}': target is constant on the training partition",
                task.name
            )));
        }
        Ok(Standardizer {
            x_mean,
            x_std,
            y_mean,
            y_std,
        })
    }

    pub fn transform_x(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.x_mean.len() {
            return Err(BoutsError::data(format!(
                "expected {} columns, got {}",
                self.x_mean.len(),
                x.cols()
            )));
        }
        let mut out = x.clone();
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                out.set(i, j, (x.get(i, j) - self.x_mean[j]) / self.x_std[j]);
            }
        }
        Ok(out)
    }

    pub fn transform_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.y_mean) / self.y_std).collect()
    }

    pub fn inverse_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| v * self.y_std + self.y_mean).collect()
    }

    pub fn transform(&self, task: &TaskDataset) -> Result<TaskDataset> {
        Ok(TaskDataset {
            name: task.name.clone(),
            feature_names: task.feature_names.clone(),
            x: self.transform_x(&task.x)?,
            y: self.transform_y(&task.y),
            sample_ids: task.sample_ids.clone(),
        })
    }
}

/// A task split into standardized partitions.
#[derive(Debug, Clone)]
pub struct PreparedTask {
    pub standardizer: Standardizer,
    pub train: TaskDataset,
    pub val: TaskDataset,
    pub test: TaskDataset,
}

impl PreparedTask {
    pub fn name(&self) -> &str {
        &self.train.name
    }
}

/// Standardize every task with statistics from its own training partition.
pub fn prepare(dataset: &MultitaskDataset, split: &SplitAssignment) -> Result<Vec<PreparedTask>> {
    if split.tasks.len() != dataset.n_tasks() {
        return Err(BoutsError::data(format!(
            "split covers {} tasks, dataset has {}",
            split.tasks.len(),
            dataset.n_tasks()
        )));
    }
    dataset
        .tasks
        .iter()
        .zip(&split.tasks)
        .map(|(task, s)| {
            let standardizer = Standardizer::fit(task, &s.train)?;
            let part = |idx: &[usize]| standardizer.transform(&task.select_rows(idx));
            Ok(PreparedTask {
                train: part(&s.train)?,
                val: part(&s.val)?,
                test: part(&s.test)?,
                standardizer,
            })
        })
        .collect()
}

/// Sample ids appearing in more than one task, with their task indices.
pub fn shared_ids(tasks: &[TaskDataset]) -> BTreeMap<String, BTreeSet<usize>> {
    let mut m: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (t, task) in tasks.iter().enumerate() {
        for id in &task.sample_ids {
            m.entry(id.clone()).or_default().insert(t);
        }
    }
    m.retain(|_, s| s.len() > 1);
    m
}
