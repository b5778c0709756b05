//! Regularization path: a log-spaced penalty grid, one BoUTS fit per
//! penalty, a downstream re-fit on the selected columns, and the rule that
//! picks the largest penalty before explained variance drops.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics, Statistics};

use crate::boosting::{BoostConfig, BoutsModel};
use crate::data::{PreparedTask, TaskDataset};
use crate::error::{BoutsError, Result};
use crate::par::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Ten,
}

impl LogBase {
    fn exp(self, v: f64) -> f64 {
        match self {
            LogBase::Natural => v.exp(),
            LogBase::Ten => 10f64.powf(v),
        }
    }
}

/// `n_points` penalties with logarithms evenly spaced from -4 to 4.
pub fn log_grid(n_points: usize, base: LogBase) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(BoutsError::config("the penalty grid needs at least 2 points"));
    }
    let step = 8.0 / (n_points - 1) as f64;
    Ok((0..n_points).map(|i| base.exp(step * i as f64 - 4.0)).collect())
}

/// `1 - Var(y - y_hat) / Var(y)`, population variances.
pub fn explained_variance(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_lengths(y_true, y_pred)?;
    let var_y = y_true.population_variance();
    if !(var_y > 0.0) {
        return Err(BoutsError::numerical("explained variance is undefined for a constant target"));
    }
    let var_r = y_true.iter().zip(y_pred).map(|(a, b)| a - b).population_variance();
    Ok(1.0 - var_r / var_y)
}

/// Elementwise absolute error on standardized labels.
pub fn normalized_absolute_error(y_true_std: &[f64], y_pred_std: &[f64]) -> Result<Vec<f64>> {
    check_lengths(y_true_std, y_pred_std)?;
    Ok(y_true_std.iter().zip(y_pred_std).map(|(a, b)| (a - b).abs()).collect())
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(BoutsError::data(format!("length mismatch: {} targets, {} predictions", a.len(), b.len())));
    }
    Ok(())
}

/// Median and quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Quartiles {
        let mut data = Data::new(values.to_vec());
        Quartiles {
            q25: data.quantile(0.25),
            median: data.quantile(0.5),
            q75: data.quantile(0.75),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PenaltySelection {
    pub index: usize,
    /// Set when even the first point fails the rule.
    pub warning: bool,
}

/// Largest `k` such that every point up to `k` keeps each task's explained
/// variance at or above `(1 - drop)` times its value at the first point.
/// `ev[j][t]` is task `t` at point `j`, ordered by increasing penalty.
pub fn select_penalty(ev: &[Vec<f64>], drop: f64) -> Result<PenaltySelection> {
    let reference = ev.first().ok_or_else(|| BoutsError::data("empty regularization path"))?;
    let ok = |row: &Vec<f64>| row.iter().zip(reference).all(|(e, r)| *e >= (1.0 - drop) * r);
    let passing = ev.iter().take_while(|row| ok(row)).count();
    Ok(match passing {
        0 => PenaltySelection { index: 0, warning: true },
        k => PenaltySelection {
            index: k - 1,
            warning: false,
        },
    })
}

/// Hyperparameter grid of the downstream single-task model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DownstreamGrid {
    pub depths: Vec<usize>,
    pub rounds: Vec<usize>,
    pub learning_rate: f64,
}

impl Default for DownstreamGrid {
    fn default() -> Self {
        DownstreamGrid {
            depths: vec![2, 3],
            rounds: vec![100, 300],
            learning_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathConfig {
    pub grid_points: usize,
    pub log_base: LogBase,
    pub drop: f64,
    pub downstream: DownstreamGrid,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            grid_points: 20,
            log_base: LogBase::Natural,
            drop: 0.1,
            downstream: DownstreamGrid::default(),
        }
    }
}

/// Downstream fit of one task on its selected columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Downstream {
    /// `None` when no feature was selected and the model is the intercept.
    pub max_depth: Option<usize>,
    pub rounds: Option<usize>,
    pub ev_train: f64,
    pub nae_test: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub universal: Vec<String>,
    pub task_specific: Vec<Vec<String>>,
    pub ev_train: Vec<f64>,
    pub nae_test: Vec<Vec<f64>>,
    pub downstream: Vec<Downstream>,
}

impl PathPoint {
    /// Universal count plus mean task-specific count.
    pub fn total_features(&self) -> f64 {
        let specific: usize = self.task_specific.iter().map(Vec::len).sum();
        self.universal.len() as f64 + specific as f64 / self.task_specific.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationPath {
    pub task_names: Vec<String>,
    pub points: Vec<PathPoint>,
}

impl RegularizationPath {
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    pub fn select(&self, drop: f64) -> Result<PenaltySelection> {
        let ev: Vec<Vec<f64>> = self.points.iter().map(|p| p.ev_train.clone()).collect();
        select_penalty(&ev, drop)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per penalty and task.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["lambda", "task", "n_universal", "n_task_specific", "ev_train", "median_nae_test"])?;
        for p in &self.points {
            for (t, name) in self.task_names.iter().enumerate() {
                let nae = &p.nae_test[t];
                let median = if nae.is_empty() { f64::NAN } else { Quartiles::of(nae).median };
                w.write_record([
                    p.lambda.to_string(),
                    name.clone(),
                    p.universal.len().to_string(),
                    p.task_specific[t].len().to_string(),
                    p.ev_train[t].to_string(),
                    median.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Feature counts against the penalty, one column per task.
    pub fn features_table(&self) -> String {
        let mut s = String::from("lambda,log_lambda,universal");
        for name in &self.task_names {
            let _ = write!(s, ",{name}");
        }
        s.push('\n');
        for p in &self.points {
            let _ = write!(s, "{},{},{}", p.lambda, p.lambda.ln(), p.universal.len());
            for ts in &p.task_specific {
                let _ = write!(s, ",{}", ts.len());
            }
            s.push('\n');
        }
        s
    }
}

/// Fit BoUTS at every penalty of `grid` (shared by both stages) and score
/// the selected columns with the downstream model. Points come back in grid
/// order.
pub fn sweep(tasks: &[PreparedTask], base: &BoostConfig, grid: &[f64], downstream: &DownstreamGrid) -> Result<RegularizationPath> {
    if grid.is_empty() {
        return Err(BoutsError::config("empty penalty grid"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(BoutsError::config("penalty grid must be strictly increasing"));
    }
    let train: Vec<TaskDataset> = tasks.iter().map(|t| t.train.clone()).collect();
    let points = grid
        .par_iter()
        .map(|&lambda| {
            path_point(tasks, &train, base, lambda, downstream).map_err(|e| BoutsError::AtPenalty {
                lambda,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegularizationPath {
        task_names: train.iter().map(|t| t.name.clone()).collect(),
        points,
    })
}

fn path_point(
    tasks: &[PreparedTask],
    train: &[TaskDataset],
    base: &BoostConfig,
    lambda: f64,
    grid: &DownstreamGrid,
) -> Result<PathPoint> {
    let config = base.clone().with_lambda(lambda);
    let model = BoutsModel::fit(train, &config)?;
    let downstream = tasks
        .par_iter()
        .enumerate()
        .map(|(t, task)| refit(task, &model.selected_indices(t), base, grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(PathPoint {
        lambda,
        universal: model.universal_features(),
        task_specific: (0..model.n_tasks()).map(|t| model.task_specific_features(t)).collect(),
        ev_train: downstream.iter().map(|d| d.ev_train).collect(),
        nae_test: downstream.iter().map(|d| d.nae_test.clone()).collect(),
        downstream,
    })
}

/// Single-task boosting with no penalty on the selected columns. The grid
/// member with the best validation explained variance is kept (training
/// explained variance if the validation target is constant).
pub fn refit(task: &PreparedTask, columns: &[usize], base: &BoostConfig, grid: &DownstreamGrid) -> Result<Downstream> {
    if columns.is_empty() {
        let zeros = |d: &TaskDataset| vec![0.0; d.n_samples()];
        return Ok(Downstream {
            max_depth: None,
            rounds: None,
            ev_train: explained_variance(&task.train.y, &zeros(&task.train))?,
            nae_test: normalized_absolute_error(&task.test.y, &zeros(&task.test))?,
        });
    }
    let train = task.train.select_columns(columns);
    let val = task.val.select_columns(columns);
    let test = task.test.select_columns(columns);
    let max_rounds = grid.rounds.iter().copied().max().unwrap_or(0);
    let score_on = if val.n_samples() >= 2 && val.y.as_slice().population_variance() > 0.0 { &val } else { &train };
    let mut best: Option<(f64, BoutsModel, usize, usize)> = None;
    for &depth in &grid.depths {
        let config = BoostConfig {
            rounds_universal: 0,
            rounds_task: max_rounds,
            learning_rate: grid.learning_rate,
            lambda_universal: 0.0,
            lambda_task: vec![0.0],
            tree: crate::trees::TreeParams {
                max_depth: depth,
                ..base.tree
            },
        };
        let full = BoutsModel::fit(std::slice::from_ref(&train), &config)?;
        let mut rounds = grid.rounds.clone();
        rounds.sort_unstable();
        for r in rounds {
            // A shorter run is a prefix of the longest one.
            let mut model = full.clone();
            model.task_trees[0].truncate(r);
            let score = explained_variance(&score_on.y, &model.predict(0, &score_on.x)?)?;
            if best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, model, depth, r));
            }
        }
    }
    let (_, model, depth, rounds) = best.ok_or_else(|| BoutsError::config("empty downstream grid"))?;
    Ok(Downstream {
        max_depth: Some(depth),
        rounds: Some(rounds),
        ev_train: explained_variance(&train.y, &model.predict(0, &train.x)?)?,
        nae_test: normalized_absolute_error(&test.y, &model.predict(0, &test.x)?)?,
    })
}
