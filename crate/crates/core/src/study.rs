//! Replicated selection study: refit on `M` randomized splits and measure
//! how consistently each selector picks its features.
//!
//! Three selectors are recorded per replicate: the universal set of BoUTS,
//! each task's full BoUTS selection (universal plus task-specific), and
//! plain single-task boosting on each task alone with the same total round
//! budget.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::boosting::{BoostConfig, BoutsModel};
use crate::data::{overlap_split, prepare, MultitaskDataset, SplitRatios, TaskDataset};
use crate::error::{BoutsError, Result};
use crate::par::*;
use crate::stability::{Comparison, SelectionMatrix, StabilityReport, StabilityVariant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub replicates: usize,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub boost: BoostConfig,
    pub variant: StabilityVariant,
    pub alpha: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            replicates: 100,
            seed: 0,
            ratios: SplitRatios::default(),
            boost: BoostConfig::default(),
            variant: StabilityVariant::Normalized,
            alpha: 0.05,
        }
    }
}

/// Selections of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSelection {
    pub universal: BTreeSet<usize>,
    pub bouts: Vec<BTreeSet<usize>>,
    pub single_task: Vec<BTreeSet<usize>>,
}

/// Fit BoUTS and the single-task baseline on one split, seeded by `seed`.
pub fn replicate(dataset: &MultitaskDataset, config: &StudyConfig, seed: u64) -> Result<ReplicateSelection> {
    let split = overlap_split(&dataset.tasks, config.ratios, seed)?;
    let train: Vec<TaskDataset> = prepare(dataset, &split)?.into_iter().map(|p| p.train).collect();
    let model = BoutsModel::fit(&train, &config.boost)?;
    let baseline = single_task_config(&config.boost);
    let single_task = train
        .par_iter()
        .enumerate()
        .map(|(t, task)| {
            let cfg = BoostConfig {
                lambda_task: vec![config.boost.lambda_for(t)],
                ..baseline.clone()
            };
            let m = BoutsModel::fit(std::slice::from_ref(task), &cfg)?;
            Ok(m.task_used[0].clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicateSelection {
        universal: model.universal_indices(),
        bouts: (0..model.n_tasks()).map(|t| model.selected_indices(t).into_iter().collect()).collect(),
        single_task,
    })
}

/// No universal stage, with the rounds of both stages given to the
/// task-specific one.
pub fn single_task_config(config: &BoostConfig) -> BoostConfig {
    BoostConfig {
        rounds_universal: 0,
        rounds_task: config.rounds_universal + config.rounds_task,
        ..config.clone()
    }
}

/// Selection matrices of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySelections {
    pub task_names: Vec<String>,
    pub universal: SelectionMatrix,
    pub bouts: Vec<SelectionMatrix>,
    pub single_task: Vec<SelectionMatrix>,
}

/// Run every replicate; replicate `m` uses split seed `seed + m`.
pub fn run_study(dataset: &MultitaskDataset, config: &StudyConfig) -> Result<StudySelections> {
    if config.replicates < 2 {
        return Err(BoutsError::config("a stability study needs at least 2 replicates"));
    }
    let reps = (0..config.replicates)
        .into_par_iter()
        .map(|m| replicate(dataset, config, config.seed.wrapping_add(m as u64)))
        .collect::<Result<Vec<_>>>()?;
    let names = dataset.candidate_features.clone();
    let matrix = |sets: Vec<BTreeSet<usize>>| SelectionMatrix::from_sets(names.clone(), &sets);
    let per_task = |pick: &dyn Fn(&ReplicateSelection) -> &Vec<BTreeSet<usize>>| {
        (0..dataset.n_tasks())
            .map(|t| matrix(reps.iter().map(|r| pick(r)[t].clone()).collect()))
            .collect::<Result<Vec<_>>>()
    };
    Ok(StudySelections {
        task_names: dataset.task_names(),
        universal: matrix(reps.iter().map(|r| r.universal.clone()).collect())?,
        bouts: per_task(&|r| &r.bouts)?,
        single_task: per_task(&|r| &r.single_task)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStability {
    pub task: String,
    pub bouts: Option<StabilityReport>,
    pub single_task: Option<StabilityReport>,
    pub universal_vs_single_task: Option<Comparison>,
    pub bouts_vs_single_task: Option<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub variant: StabilityVariant,
    pub alpha: f64,
    pub replicates: usize,
    pub feature_penalty: f64,
    pub universal: Option<StabilityReport>,
    pub tasks: Vec<TaskStability>,
    /// Why a statistic is missing, when one is.
    pub notes: Vec<String>,
}

impl StudySelections {
    /// Statistics that are undefined (e.g. a selector that never selects
    /// anything under the normalized estimator) are reported as `null` with
    /// a note.
    pub fn report(&self, config: &StudyConfig) -> StudyReport {
        let mut notes = Vec::new();
        let penalty = Some(config.boost.lambda_universal);
        let mut summarize = |label: &str, z: &SelectionMatrix| {
            StabilityReport::new(z, config.variant, config.alpha, penalty)
                .map_err(|e| notes.push(format!("{label}: {e}")))
                .ok()
        };
        let universal = summarize("universal", &self.universal);
        let mut tasks: Vec<TaskStability> = self
            .task_names
            .iter()
            .enumerate()
            .map(|(t, name)| TaskStability {
                task: name.clone(),
                bouts: summarize(&format!("{name} bouts"), &self.bouts[t]),
                single_task: summarize(&format!("{name} single-task"), &self.single_task[t]),
                universal_vs_single_task: None,
                bouts_vs_single_task: None,
            })
            .collect();
        for (t, entry) in tasks.iter_mut().enumerate() {
            let single = (entry.task.as_str(), &self.single_task[t]);
            let mut compare = |a: (&str, &SelectionMatrix)| {
                Comparison::new(a, single, config.variant)
                    .map_err(|e| notes.push(format!("{} vs {}: {e}", a.0, single.0)))
                    .ok()
            };
            entry.universal_vs_single_task = compare(("universal", &self.universal));
            entry.bouts_vs_single_task = compare(("bouts", &self.bouts[t]));
        }
        StudyReport {
            variant: config.variant,
            alpha: config.alpha,
            replicates: self.universal.n_replicates(),
            feature_penalty: config.boost.lambda_universal,
            universal,
            tasks,
            notes,
        }
    }
}
