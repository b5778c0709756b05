use std::fmt;
use std::fs;
use std::path::PathBuf;

use bouts_core::data::SplitRatios;
use bouts_core::pathsweep::PathConfig;
use bouts_core::stability::StabilityVariant;
use bouts_core::{BoostConfig, BoutsError};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(BoutsError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e.root() {
                BoutsError::Config(_) => 2,
                BoutsError::Numerical(_) => 4,
                _ => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl From<BoutsError> for CliError {
    fn from(e: BoutsError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(e.into())
    }
}

/// Everything a `fit`, `path` or `stability` run needs. Read from `--config`
/// (JSON, every field optional) and then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
    pub boost: BoostConfig,
    pub ratios: SplitRatios,
    pub path: PathConfig,
    pub replicates: usize,
    pub variant: StabilityVariant,
    pub alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            out: None,
            seed: 0,
            jobs: 0,
            boost: BoostConfig::default(),
            ratios: SplitRatios::default(),
            path: PathConfig::default(),
            replicates: 100,
            variant: StabilityVariant::Normalized,
            alpha: 0.05,
        }
    }
}

/// Resolved run settings with the required paths present.
pub struct Resolved {
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub jobs: usize,
    pub config: RunConfig,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Normalized,
    PaperFormula,
}

#[derive(Args)]
pub struct Overrides {
    /// JSON run configuration; flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON object mapping task names to CSV paths.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    rounds_universal: Option<usize>,
    #[arg(long)]
    rounds_task: Option<usize>,
    /// Feature penalty for both stages (ignored by `path`, which sweeps it).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_samples_leaf: Option<usize>,
    #[arg(long)]
    min_gain: Option<f64>,
    #[arg(long, value_enum)]
    stability_variant: Option<VariantArg>,
    #[arg(long)]
    replicates: Option<usize>,
}

impl Overrides {
    pub fn resolve(self) -> Result<Resolved, CliError> {
        let mut c = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        set(&mut c.manifest, self.manifest.map(Some));
        set(&mut c.out, self.out.map(Some));
        set(&mut c.seed, self.seed);
        set(&mut c.jobs, self.jobs);
        set(&mut c.boost.learning_rate, self.learning_rate);
        set(&mut c.boost.rounds_universal, self.rounds_universal);
        set(&mut c.boost.rounds_task, self.rounds_task);
        if let Some(l) = self.lambda {
            c.boost = c.boost.with_lambda(l);
        }
        set(&mut c.path.grid_points, self.grid_points);
        set(&mut c.boost.tree.max_depth, self.max_depth);
        set(&mut c.boost.tree.min_samples_leaf, self.min_samples_leaf);
        set(&mut c.boost.tree.min_gain, self.min_gain);
        set(
            &mut c.variant,
            self.stability_variant.map(|v| match v {
                VariantArg::Normalized => StabilityVariant::Normalized,
                VariantArg::PaperFormula => StabilityVariant::PaperFormula,
            }),
        );
        set(&mut c.replicates, self.replicates);

        c.ratios.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let manifest = c
            .manifest
            .clone()
            .ok_or_else(|| CliError::Usage("--manifest is required (flag or config)".into()))?;
        if !manifest.is_file() {
            return Err(CliError::Usage(format!("manifest {} does not exist", manifest.display())));
        }
        let out = c
            .out
            .clone()
            .ok_or_else(|| CliError::Usage("--out is required (flag or config)".into()))?;
        Ok(Resolved {
            manifest,
            out,
            jobs: c.jobs,
            config: c,
        })
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
