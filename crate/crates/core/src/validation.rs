//! Repeated random train/test splits with R² and RMSE% scoring.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gp::{GpConfig, GpModel};
use crate::io;
use crate::scalar::Scalar;
use crate::seed::derive_seed;

pub const MIN_DATASET: usize = 5;

/// Disjoint random partition of `0..n` into train and test index sets
/// (both sorted). The train set has `round(n·train_fraction)` entries.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("train_fraction {train_fraction} outside (0, 1)")));
    }
    if n < MIN_DATASET {
        return Err(Error::invalid(format!("dataset of {n} rows is too small to split (need {MIN_DATASET})")));
    }
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::invalid("split leaves an empty train or test set"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_dataset<T: Scalar>(ds: &Dataset<T>, train_fraction: f64, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    let (train, test) = split_indices(ds.len(), train_fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

fn check_pair<T: Scalar>(pred: &[T], actual: &[T], min_len: usize) -> Result<()> {
    if pred.len() != actual.len() {
        return Err(Error::DimensionMismatch { expected: actual.len(), got: pred.len() });
    }
    if actual.len() < min_len {
        return Err(Error::UndefinedMetric(format!("need at least {min_len} values")));
    }
    Ok(())
}

/// `1 − SS_res / SS_tot`.
pub fn r2_score<T: Scalar>(pred: &[T], actual: &[T]) -> Result<T> {
    check_pair(pred, actual, 2)?;
    let n = T::from_usize_lossy(actual.len());
    let mean = actual.iter().copied().sum::<T>() / n;
    let ss_tot: T = actual.iter().map(|&a| (a - mean) * (a - mean)).sum();
    if ss_tot == T::zero() {
        return Err(Error::UndefinedMetric("R² of a constant target".into()));
    }
    let ss_res: T = pred.iter().zip(actual).map(|(&p, &a)| (a - p) * (a - p)).sum();
    Ok(T::one() - ss_res / ss_tot)
}

/// Root-mean-square error as a percentage of the mean absolute target.
pub fn rmse_pct<T: Scalar>(pred: &[T], actual: &[T]) -> Result<T> {
    check_pair(pred, actual, 1)?;
    let n = T::from_usize_lossy(actual.len());
    let scale = actual.iter().map(|a| a.abs()).sum::<T>() / n;
    if scale == T::zero() {
        return Err(Error::UndefinedMetric("RMSE% with zero mean |actual|".into()));
    }
    let mse = pred.iter().zip(actual).map(|(&p, &a)| (p - a) * (p - a)).sum::<T>() / n;
    Ok(T::lit(100.0) * mse.sqrt() / scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiMethod {
    /// mean ± 1.96·sd/√n over seeds.
    #[default]
    Normal,
    /// 2.5/97.5 percentiles of bootstrap means over seeds.
    Bootstrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub train_fraction: f64,
    pub n_seeds: usize,
    pub ci_method: CiMethod,
    pub bootstrap_resamples: usize,
    /// Share of failed seeds above which the run aborts.
    pub max_failure_fraction: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            train_fraction: 0.8,
            n_seeds: 75,
            ci_method: CiMethod::Normal,
            bootstrap_resamples: 2000,
            max_failure_fraction: 0.2,
        }
    }
}

impl ValidationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_seeds < 2 {
            return Err(Error::invalid("n_seeds must be at least 2"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train_fraction must lie in (0, 1)"));
        }
        if self.ci_method == CiMethod::Bootstrap && self.bootstrap_resamples == 0 {
            return Err(Error::invalid("bootstrap_resamples must be positive"));
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return Err(Error::invalid("max_failure_fraction must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub r2: f64,
    pub rmse_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScores {
    pub train: Scores,
    pub test: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub index: usize,
    pub seed: u64,
    pub energy: TargetScores,
    pub power: TargetScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    /// Mean over seeds.
    pub r2: f64,
    pub rmse_pct: f64,
    /// Interval on R² over seeds.
    pub ci95: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub train: PhaseSummary,
    pub test: PhaseSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_rows: usize,
    pub train_fraction: f64,
    pub ci_method: CiMethod,
    pub energy: TargetSummary,
    pub power: TargetSummary,
    pub seeds: Vec<SeedRecord>,
    pub failures: Vec<SeedFailure>,
}

fn score<T: Scalar>(model: &GpModel<T>, x: &[Vec<T>], y: &[T]) -> Result<Scores> {
    let pred = x.iter().map(|r| model.predict_mean(r)).collect::<Result<Vec<T>>>()?;
    Ok(Scores { r2: r2_score(&pred, y)?.as_f64(), rmse_pct: rmse_pct(&pred, y)?.as_f64() })
}

fn fit_and_score<T: Scalar>(
    x: &[Vec<T>],
    y: &[T],
    train: &[usize],
    test: &[usize],
    gp: &GpConfig<T>,
) -> Result<TargetScores> {
    let pick = |idx: &[usize]| -> (Vec<Vec<T>>, Vec<T>) { (idx.iter().map(|&i| x[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect()) };
    let (xtr, ytr) = pick(train);
    let (xte, yte) = pick(test);
    let model = GpModel::fit(&xtr, &ytr, gp)?;
    Ok(TargetScores { train: score(&model, &xtr, &ytr)?, test: score(&model, &xte, &yte)? })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn ci95(values: &[f64], method: CiMethod, resamples: usize, seed: u64) -> [f64; 2] {
    let m = mean(values);
    let n = values.len();
    match method {
        CiMethod::Normal => {
            if n < 2 {
                return [m, m];
            }
            let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
            let half = 1.96 * var.sqrt() / (n as f64).sqrt();
            [m - half, m + half]
        }
        CiMethod::Bootstrap => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut means: Vec<f64> = (0..resamples)
                .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
                .collect();
            means.sort_by(f64::total_cmp);
            let at = |q: f64| means[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
            // keep the interval around the point estimate even for skewed samples
            [at(0.025).min(m), at(0.975).max(m)]
        }
    }
}

fn summarize(records: &[SeedRecord], pick: fn(&SeedRecord) -> Scores, cfg: &ValidationConfig, seed: u64) -> PhaseSummary {
    let r2: Vec<f64> = records.iter().map(|r| pick(r).r2).collect();
    let rmse: Vec<f64> = records.iter().map(|r| pick(r).rmse_pct).collect();
    PhaseSummary { r2: mean(&r2), rmse_pct: mean(&rmse), ci95: ci95(&r2, cfg.ci_method, cfg.bootstrap_resamples, seed) }
}

/// Splits, fits both regressors and scores them for `cfg.n_seeds` seeds
/// derived from `root_seed`. Seeds run in parallel; the report is ordered by
/// seed index.
pub fn ci95_resampling<T: Scalar>(
    ds: &Dataset<T>,
    gp: &GpConfig<T>,
    cfg: &ValidationConfig,
    root_seed: u64,
) -> Result<ValidationReport> {
    cfg.validate()?;
    gp.validate()?;
    if ds.len() < MIN_DATASET {
        return Err(Error::invalid(format!("dataset of {} rows is too small to validate", ds.len())));
    }
    let x = ds.inputs();
    let e = ds.energy();
    let p = ds.power();
    let outcomes: Vec<(usize, u64, Result<SeedRecord>)> = (0..cfg.n_seeds)
        .into_par_iter()
        .map(|index| {
            let seed = derive_seed(root_seed, "validation-split", index as u64);
            let run = || -> Result<SeedRecord> {
                let (train, test) = split_indices(ds.len(), cfg.train_fraction, seed)?;
                Ok(SeedRecord {
                    index,
                    seed,
                    energy: fit_and_score(&x, &e, &train, &test, gp)?,
                    power: fit_and_score(&x, &p, &train, &test, gp)?,
                })
            };
            (index, seed, run())
        })
        .collect();

    let mut seeds = Vec::new();
    let mut failures = Vec::new();
    for (index, seed, outcome) in outcomes {
        match outcome {
            Ok(r) => seeds.push(r),
            Err(err) => failures.push(SeedFailure { index, seed, error: err.to_string() }),
        }
    }
    if failures.len() as f64 > cfg.max_failure_fraction * cfg.n_seeds as f64 || seeds.is_empty() {
        return Err(Error::TooManyFailures { failed: failures.len(), total: cfg.n_seeds });
    }
    let boot = derive_seed(root_seed, "validation-bootstrap", 0);
    let target = |train: fn(&SeedRecord) -> Scores, test: fn(&SeedRecord) -> Scores, k: u64| TargetSummary {
        train: summarize(&seeds, train, cfg, boot.wrapping_add(2 * k)),
        test: summarize(&seeds, test, cfg, boot.wrapping_add(2 * k + 1)),
    };
    Ok(ValidationReport {
        n_rows: ds.len(),
        train_fraction: cfg.train_fraction,
        ci_method: cfg.ci_method,
        energy: target(|r| r.energy.train, |r| r.energy.test, 0),
        power: target(|r| r.power.train, |r| r.power.test, 1),
        seeds,
        failures,
    })
}

impl ValidationReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Validation over {} random {:.0}/{:.0} splits ({} rows, {} failed).\n",
            self.seeds.len(),
            self.train_fraction * 100.0,
            (1.0 - self.train_fraction) * 100.0,
            self.n_rows,
            self.failures.len()
        );
        s.push_str("| Target | Dataset | R² | RMSE % | CI95 (R²) |\n");
        s.push_str("|---|---|---|---|---|\n");
        for (name, t) in [("E (Wh/kg)", &self.energy), ("P (W/kg)", &self.power)] {
            for (phase, p) in [("train", &t.train), ("test", &t.test)] {
                let _ = writeln!(
                    s,
                    "| {name} | {phase} | {:.4} | {:.3} | [{:.4}; {:.4}] |",
                    p.r2, p.rmse_pct, p.ci95[0], p.ci95[1]
                );
            }
        }
        s
    }

    pub fn write_markdown(&self, path: &Path) -> Result<()> {
        io::write_text(path, &self.to_markdown())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_and_partition() {
        let (tr, te) = split_indices(10, 0.8, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split_indices(10, 0.8, 3).unwrap(), (tr, te));
    }

    #[test]
    fn split_rejects_small_or_bad_fraction() {
        assert!(split_indices(4, 0.8, 0).is_err());
        assert!(split_indices(10, 1.0, 0).is_err());
        assert!(split_indices(10, 0.0, 0).is_err());
    }

    #[test]
    fn r2_examples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(r2_score(&a, &a).unwrap(), 1.0);
        assert_eq!(r2_score(&[2.0; 3], &a).unwrap(), 0.0);
        assert!((r2_score(&[1.0, 2.0, 4.0], &a).unwrap() - 0.5_f64).abs() < 1e-15);
        assert!(matches!(r2_score(&a, &[2.0; 3]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn rmse_examples() {
        let a = [1.0, 2.0, 5.0];
        assert_eq!(rmse_pct(&a, &a).unwrap(), 0.0);
        assert!((rmse_pct(&[4.4; 4], &[4.0; 4]).unwrap() - 10.0_f64).abs() < 1e-12);
        let scaled: Vec<f64> = a.iter().map(|v| v * 1.1).collect();
        let r = rmse_pct(&scaled, &a).unwrap();
        let want = 100.0 * (a.iter().map(|v| (0.1 * v) * (0.1 * v)).sum::<f64>() / 3.0).sqrt() / (8.0 / 3.0);
        assert!((r - want).abs() < 1e-12);
        assert!((rmse_pct(&[3.0, 3.0], &[2.0, 4.0]).unwrap() - 100.0 / 3.0_f64).abs() < 1e-12);
        assert!(rmse_pct(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn constant_scores_collapse_interval() {
        assert_eq!(ci95(&[0.9; 5], CiMethod::Normal, 0, 0), [0.9, 0.9]);
        let b = ci95(&[0.9; 5], CiMethod::Bootstrap, 100, 1);
        assert!((b[0] - 0.9).abs() < 1e-15 && (b[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn interval_contains_mean() {
        let v = [0.91, 0.95, 0.97, 0.99, 0.93, 0.96];
        for m in [CiMethod::Normal, CiMethod::Bootstrap] {
            let ci = ci95(&v, m, 500, 7);
            assert!(ci[0] <= mean(&v) && mean(&v) <= ci[1]);
        }
    }
}
