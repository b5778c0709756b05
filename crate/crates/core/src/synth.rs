//! Synthetic multitask data with planted universal and task-specific
//! features.
//!
//! Planted features are independent standard normals. The remaining
//! nuisance features are equicorrelated normals with correlation `rho`.
//! Task `t` sees `sign_t * (g(x_U) + h_t(x_{S_t})) + noise`.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{build_category, MultitaskDataset, TaskDataset};
use crate::error::{BoutsError, Result};
use crate::matrix::Matrix;
use crate::par::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    /// Sum of the planted features.
    Linear,
    /// Sum of squares plus half the products of consecutive planted features.
    #[default]
    Quadratic,
    /// Sum of the planted features plus products of consecutive ones.
    Interaction,
}

impl Nonlinearity {
    pub fn apply(self, v: &[f64]) -> f64 {
        let pairs = || v.windows(2).map(|w| w[0] * w[1]);
        match self {
            Nonlinearity::Linear => v.iter().sum(),
            Nonlinearity::Quadratic => v.iter().map(|a| a * a).sum::<f64>() + 0.5 * pairs().sum::<f64>(),
            Nonlinearity::Interaction => v.iter().sum::<f64>() + pairs().sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_features: usize,
    /// Samples per task; its length is the number of tasks.
    pub n_samples: Vec<usize>,
    pub universal: Vec<usize>,
    pub task_specific: Vec<Vec<usize>>,
    pub noise_sigma: f64,
    pub nonlinearity: Nonlinearity,
    pub correlation_rho: f64,
    /// +1 or -1 per task.
    pub output_sign: Vec<f64>,
    /// Share of each task's rows drawn from a pool of samples common to all
    /// tasks (same id and features in every task that uses them).
    pub shared_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec::planted(3, 50, 3, 2, 500, 0)
    }
}

impl SynthSpec {
    /// `n_universal` universal and `n_specific` features per task, placed at
    /// seeded random columns, alternating output signs.
    pub fn planted(n_tasks: usize, n_features: usize, n_universal: usize, n_specific: usize, n_samples: usize, seed: u64) -> Self {
        let mut cols: Vec<usize> = (0..n_features).collect();
        cols.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_dc01));
        let mut it = cols.into_iter();
        let mut universal: Vec<usize> = it.by_ref().take(n_universal).collect();
        universal.sort_unstable();
        let task_specific = (0..n_tasks)
            .map(|_| {
                let mut s: Vec<usize> = it.by_ref().take(n_specific).collect();
                s.sort_unstable();
                s
            })
            .collect();
        SynthSpec {
            n_features,
            n_samples: vec![n_samples; n_tasks],
            universal,
            task_specific,
            noise_sigma: 0.1,
            nonlinearity: Nonlinearity::Quadratic,
            correlation_rho: 0.0,
            output_sign: (0..n_tasks).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect(),
            shared_fraction: 0.0,
            seed,
        }
    }

    pub fn n_tasks(&self) -> usize {
        self.n_samples.len()
    }

    pub fn task_name(&self, t: usize) -> String {
        format!("task{t}")
    }

    pub fn feature_name(&self, j: usize) -> String {
        let width = (self.n_features.max(2) - 1).to_string().len().max(3);
        format!("x{j:0width$}")
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.n_tasks();
        let err = |m: String| Err(BoutsError::config(m));
        if t == 0 {
            return err("at least one task is required".into());
        }
        if self.task_specific.len() != t || self.output_sign.len() != t {
            return err(format!(
                "task_specific and output_sign need one entry per task ({t}), got {} and {}",
                self.task_specific.len(),
                self.output_sign.len()
            ));
        }
        if self.n_samples.iter().any(|&n| n < 2) {
            return err("every task needs at least 2 samples".into());
        }
        let all = self.universal.iter().chain(self.task_specific.iter().flatten());
        if let Some(j) = all.clone().find(|&&j| j >= self.n_features) {
            return err(format!("planted feature {j} out of range ({} features)", self.n_features));
        }
        let universal: BTreeSet<usize> = self.universal.iter().copied().collect();
        if universal.len() != self.universal.len() {
            return err("universal features must be distinct".into());
        }
        for (k, s) in self.task_specific.iter().enumerate() {
            if s.iter().collect::<BTreeSet<_>>().len() != s.len() {
                return err(format!("task-specific features of task {k} must be distinct"));
            }
            if let Some(j) = s.iter().find(|j| universal.contains(j)) {
                return err(format!("feature {j} is both universal and specific to task {k}"));
            }
        }
        if t > 1 {
            if let Some(j) = self.task_specific[0].iter().find(|j| self.task_specific.iter().all(|s| s.contains(j))) {
                return err(format!("task-specific feature {j} is planted in every task"));
            }
        }
        let planted = self.universal.len() + self.task_specific.iter().map(Vec::len).sum::<usize>();
        if planted >= self.n_features {
            return err(format!(
                "{planted} planted features leave no nuisance feature among {}",
                self.n_features
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return err("noise_sigma must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&self.correlation_rho) {
            return err("correlation_rho must be in [0, 1)".into());
        }
        if self.output_sign.iter().any(|&s| s != 1.0 && s != -1.0) {
            return err("output_sign entries must be +1 or -1".into());
        }
        if !(0.0..=1.0).contains(&self.shared_fraction) {
            return err("shared_fraction must be in [0, 1]".into());
        }
        Ok(())
    }

    fn planted_set(&self) -> BTreeSet<usize> {
        self.universal.iter().chain(self.task_specific.iter().flatten()).copied().collect()
    }

    fn draw_row(&self, planted: &BTreeSet<usize>, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let (a, b) = (self.correlation_rho.sqrt(), (1.0 - self.correlation_rho).sqrt());
        let common: f64 = StandardNormal.sample(rng);
        (0..self.n_features)
            .map(|j| {
                let e: f64 = StandardNormal.sample(rng);
                if planted.contains(&j) {
                    e
                } else {
                    a * common + b * e
                }
            })
            .collect()
    }

    /// Noise-free response of task `t` to one feature row.
    pub fn signal(&self, t: usize, x: &[f64]) -> f64 {
        let pick = |idx: &[usize]| idx.iter().map(|&j| x[j]).collect::<Vec<f64>>();
        let g = self.nonlinearity.apply(&pick(&self.universal));
        let h = self.nonlinearity.apply(&pick(&self.task_specific[t]));
        self.output_sign[t] * (g + h)
    }

    pub fn ground_truth(&self) -> GroundTruth {
        let names = |idx: &[usize]| {
            let mut v: Vec<String> = idx.iter().map(|&j| self.feature_name(j)).collect();
            v.sort();
            v
        };
        GroundTruth {
            universal: names(&self.universal),
            task_specific: (0..self.n_tasks())
                .map(|t| (self.task_name(t), names(&self.task_specific[t])))
                .collect(),
        }
    }

    pub fn generate(&self) -> Result<Synthetic> {
        self.validate()?;
        let planted = self.planted_set();
        let counts: Vec<usize> = self
            .n_samples
            .iter()
            .map(|&n| (self.shared_fraction * n as f64).round() as usize)
            .collect();
        let mut pool_rng = ChaCha8Rng::seed_from_u64(self.seed);
        let pool: Vec<Vec<f64>> = (0..counts.iter().copied().max().unwrap_or(0))
            .map(|_| self.draw_row(&planted, &mut pool_rng))
            .collect();
        let names: Vec<String> = (0..self.n_features).map(|j| self.feature_name(j)).collect();
        let tasks = (0..self.n_tasks())
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(t as u64 + 1);
                let n = self.n_samples[t];
                let mut rows = Vec::with_capacity(n);
                let mut ids = Vec::with_capacity(n);
                for (i, row) in pool.iter().take(counts[t]).enumerate() {
                    rows.push(row.clone());
                    ids.push(format!("s{i:05}"));
                }
                for i in counts[t]..n {
                    rows.push(self.draw_row(&planted, &mut rng));
                    ids.push(format!("t{t}_{i:05}"));
                }
                let y = rows
                    .iter()
                    .map(|r| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        self.signal(t, r) + self.noise_sigma * e
                    })
                    .collect();
                TaskDataset::new(self.task_name(t), names.clone(), Matrix::from_rows(&rows)?, y, ids)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Synthetic {
            dataset: build_category(tasks)?,
            truth: self.ground_truth(),
        })
    }
}

/// Planted feature names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub universal: Vec<String>,
    pub task_specific: IndexMap<String, Vec<String>>,
}

pub struct Synthetic {
    pub dataset: MultitaskDataset,
    pub truth: GroundTruth,
}

impl Synthetic {
    /// Write one CSV per task, `manifest.json` and `truth.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut manifest = IndexMap::new();
        for task in &self.dataset.tasks {
            let file = format!("{}.csv", task.name);
            task.write_csv(dir.join(&file))?;
            manifest.insert(task.name.clone(), file);
        }
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        fs::write(dir.join("truth.json"), serde_json::to_string_pretty(&self.truth)? + "\n")?;
        Ok(())
    }
}
