//! Stability of feature selection across randomized replicates.
//!
//! A selection matrix `Z` holds one row per replicate and one column per
//! candidate feature. Two estimators are offered: the plain mean of the
//! per-feature selection variances, and the version normalized by the
//! variance expected from selecting the same number of features at random.
//! Both come with an asymptotic variance so that two selectors can be
//! compared with a Z-test.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::statistics::{OrderStatistics, RankTieBreaker, Statistics};

use crate::data::TaskDataset;
use crate::error::{BoutsError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVariant {
    /// `1 - mean_f s_f^2`.
    PaperFormula,
    /// `1 - mean_f s_f^2 / ((k/d)(1 - k/d))` with `k` the mean selection size.
    #[default]
    Normalized,
}

/// Binary `M x d` record of selections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionMatrix {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<bool>>,
}

impl SelectionMatrix {
    pub fn new(feature_names: Vec<String>, rows: Vec<Vec<bool>>) -> Result<Self> {
        if let Some(r) = rows.iter().position(|r| r.len() != feature_names.len()) {
            return Err(BoutsError::data(format!(
                "selection row {r} has {} entries for {} features",
                rows[r].len(),
                feature_names.len()
            )));
        }
        Ok(SelectionMatrix { feature_names, rows })
    }

    /// One row per replicate from sets of selected column indices.
    pub fn from_sets(feature_names: Vec<String>, sets: &[BTreeSet<usize>]) -> Result<Self> {
        let d = feature_names.len();
        if let Some(f) = sets.iter().flatten().find(|&&f| f >= d) {
            return Err(BoutsError::data(format!("selected index {f} out of range ({d} features)")));
        }
        let rows = sets.iter().map(|s| (0..d).map(|f| s.contains(&f)).collect()).collect();
        Ok(SelectionMatrix { feature_names, rows })
    }

    pub fn n_replicates(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Number of selected features per replicate.
    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().filter(|&&z| z).count() as f64).collect()
    }

    pub fn mean_selected(&self) -> f64 {
        let k = self.row_sums();
        k.iter().sum::<f64>() / k.len() as f64
    }

    /// Selection frequency of each feature.
    pub fn frequencies(&self) -> Vec<f64> {
        let m = self.n_replicates() as f64;
        (0..self.n_features())
            .map(|f| self.rows.iter().filter(|r| r[f]).count() as f64 / m)
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(&self.feature_names)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|&z| if z { "1" } else { "0" }))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path)?;
        let feature_names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let row = rec
                .iter()
                .enumerate()
                .map(|(j, cell)| match cell.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(BoutsError::Parse {
                        path: path.display().to_string(),
                        line,
                        column: j + 1,
                        message: format!("expected 0 or 1, got {other:?}"),
                    }),
                })
                .collect::<Result<Vec<bool>>>()?;
            rows.push(row);
        }
        Self::new(feature_names, rows)
    }

    fn check(&self, variant: StabilityVariant) -> Result<()> {
        if self.n_replicates() < 2 {
            return Err(BoutsError::data("stability needs at least 2 replicates"));
        }
        if self.n_features() == 0 {
            return Err(BoutsError::data("stability needs at least one feature"));
        }
        if variant == StabilityVariant::Normalized {
            let k = self.mean_selected();
            if k == 0.0 || k == self.n_features() as f64 {
                return Err(BoutsError::numerical(
                    "normalized stability is undefined when no feature or every feature is always selected",
                ));
            }
        }
        Ok(())
    }
}

/// `(k/d)(1 - k/d)`, or 1 for the unnormalized estimator.
fn denominator(z: &SelectionMatrix, variant: StabilityVariant) -> f64 {
    match variant {
        StabilityVariant::PaperFormula => 1.0,
        StabilityVariant::Normalized => {
            let q = z.mean_selected() / z.n_features() as f64;
            q * (1.0 - q)
        }
    }
}

pub fn stability(z: &SelectionMatrix, variant: StabilityVariant) -> Result<f64> {
    z.check(variant)?;
    let m = z.n_replicates() as f64;
    let d = z.n_features() as f64;
    let mean_s2 = z.frequencies().iter().map(|p| m / (m - 1.0) * p * (1.0 - p)).sum::<f64>() / d;
    Ok(1.0 - mean_s2 / denominator(z, variant))
}

/// Asymptotic variance of the stability estimate, from the per-replicate
/// influence terms of the estimator.
pub fn stability_variance(z: &SelectionMatrix, variant: StabilityVariant) -> Result<f64> {
    let phi = stability(z, variant)?;
    let m = z.n_replicates() as f64;
    let d = z.n_features() as f64;
    let p = z.frequencies();
    let k = z.row_sums();
    let kbar = k.iter().sum::<f64>() / m;
    let denom = denominator(z, variant);
    let terms: Vec<f64> = z
        .rows
        .iter()
        .zip(&k)
        .map(|(row, &ki)| {
            let overlap = row.iter().zip(&p).filter(|(z, _)| **z).map(|(_, p)| p).sum::<f64>() / d;
            match variant {
                StabilityVariant::PaperFormula => overlap - ki / (2.0 * d),
                StabilityVariant::Normalized => {
                    let shift = 2.0 * ki * kbar / (d * d) - ki / d - kbar / d + 1.0;
                    (overlap - ki * kbar / (d * d) + phi / 2.0 * shift) / denom
                }
            }
        })
        .collect();
    let mean = terms.iter().sum::<f64>() / m;
    Ok(4.0 / (m * m) * terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>())
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Two-sided normal interval `phi +- z_{1 - alpha/2} sqrt(v)`.
pub fn stability_ci(z: &SelectionMatrix, alpha: f64, variant: StabilityVariant) -> Result<(f64, f64)> {
    interval(stability(z, variant)?, stability_variance(z, variant)?, alpha)
}

fn interval(phi: f64, variance: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BoutsError::config("alpha must be in (0, 1)"));
    }
    let half = std_normal().inverse_cdf(1.0 - alpha / 2.0) * variance.sqrt();
    Ok((phi - half, phi + half))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample test of equal stability.
pub fn ztest(a: &SelectionMatrix, b: &SelectionMatrix, variant: StabilityVariant) -> Result<ZTest> {
    let (pa, va) = (stability(a, variant)?, stability_variance(a, variant)?);
    let (pb, vb) = (stability(b, variant)?, stability_variance(b, variant)?);
    Ok(ztest_from(pa, va, pb, vb))
}

fn ztest_from(pa: f64, va: f64, pb: f64, vb: f64) -> ZTest {
    let v = va + vb;
    if v == 0.0 {
        return if pa == pb {
            ZTest {
                statistic: 0.0,
                p_value: 1.0,
            }
        } else {
            ZTest {
                statistic: if pa > pb { f64::INFINITY } else { f64::NEG_INFINITY },
                p_value: 0.0,
            }
        };
    }
    let t = (pa - pb) / v.sqrt();
    ZTest {
        statistic: t,
        p_value: 2.0 * (1.0 - std_normal().cdf(t.abs())),
    }
}

/// `sqrt(2)` times the test statistic; both matrices need the same number
/// of replicates.
pub fn cohens_d(a: &SelectionMatrix, b: &SelectionMatrix, variant: StabilityVariant) -> Result<f64> {
    if a.n_replicates() != b.n_replicates() {
        return Err(BoutsError::data(format!(
            "Cohen's d needs equal replicate counts, got {} and {}",
            a.n_replicates(),
            b.n_replicates()
        )));
    }
    Ok(std::f64::consts::SQRT_2 * ztest(a, b, variant)?.statistic)
}

/// Rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(BoutsError::data(format!(
            "Spearman correlation needs two equal-length vectors of at least 2 values, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(BoutsError::numerical("Spearman correlation of NaN values"));
    }
    let rx = statrs::statistics::Data::new(x.to_vec()).ranks(RankTieBreaker::Average);
    let ry = statrs::statistics::Data::new(y.to_vec()).ranks(RankTieBreaker::Average);
    let (vx, vy) = (rx.as_slice().population_variance(), ry.as_slice().population_variance());
    if vx == 0.0 || vy == 0.0 {
        return Err(BoutsError::numerical("Spearman correlation of a constant vector"));
    }
    let cov = rx.as_slice().population_covariance(ry.as_slice());
    Ok((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

/// Mean absolute Spearman correlation between named features over the
/// datasets where both are present and defined. `None` marks pairs that no
/// dataset defines.
pub fn universal_correlation_matrix(datasets: &[TaskDataset], features: &[String]) -> Vec<Vec<Option<f64>>> {
    let columns: Vec<Vec<Option<Vec<f64>>>> = datasets
        .iter()
        .map(|ds| {
            features
                .iter()
                .map(|name| {
                    let j = ds.feature_names.iter().position(|n| n == name)?;
                    Some(ds.x.column(j))
                })
                .collect()
        })
        .collect();
    let n = features.len();
    let mut out = vec![vec![None; n]; n];
    for i in 0..n {
        out[i][i] = Some(1.0);
        for j in (i + 1)..n {
            let values: Vec<f64> = columns
                .iter()
                .filter_map(|cols| match (&cols[i], &cols[j]) {
                    (Some(a), Some(b)) => spearman(a, b).ok().map(f64::abs),
                    _ => None,
                })
                .collect();
            if !values.is_empty() {
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                out[i][j] = Some(mean);
                out[j][i] = Some(mean);
            }
        }
    }
    out
}

/// Summary of one selection matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub variant: StabilityVariant,
    pub replicates: usize,
    pub candidate_features: usize,
    pub stability: f64,
    pub variance: f64,
    pub alpha: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_features_selected: f64,
    pub feature_penalty: Option<f64>,
}

impl StabilityReport {
    pub fn new(z: &SelectionMatrix, variant: StabilityVariant, alpha: f64, feature_penalty: Option<f64>) -> Result<Self> {
        let stability = stability(z, variant)?;
        let variance = stability_variance(z, variant)?;
        let (ci_low, ci_high) = interval(stability, variance, alpha)?;
        Ok(StabilityReport {
            variant,
            replicates: z.n_replicates(),
            candidate_features: z.n_features(),
            stability,
            variance,
            alpha,
            ci_low,
            ci_high,
            mean_features_selected: z.mean_selected(),
            feature_penalty,
        })
    }
}

/// Test of one selector's stability against another's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub statistic: f64,
    pub p_value: f64,
    pub cohens_d: Option<f64>,
}

impl Comparison {
    pub fn new(
        a: (&str, &SelectionMatrix),
        b: (&str, &SelectionMatrix),
        variant: StabilityVariant,
    ) -> Result<Self> {
        let test = ztest(a.1, b.1, variant)?;
        let d = (a.1.n_replicates() == b.1.n_replicates()).then_some(std::f64::consts::SQRT_2 * test.statistic);
        Ok(Comparison {
            a: a.0.to_string(),
            b: b.0.to_string(),
            statistic: test.statistic,
            p_value: test.p_value,
            cohens_d: d,
        })
    }
}
