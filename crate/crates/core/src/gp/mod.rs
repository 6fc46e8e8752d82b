//! Gaussian-process regression with a zero prior mean.

mod kernel;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::linalg::Cholesky;
use crate::scalar::Scalar;

pub use kernel::KernelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputScaling {
    /// Fit raw targets.
    None,
    /// Shift and scale targets to zero mean, unit variance before fitting.
    #[default]
    Standardize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound = "T: Scalar")]
pub struct GpConfig<T> {
    pub kernel: KernelSpec<T>,
    /// σ_ε², in the units of the (possibly standardized) targets.
    pub noise_variance: T,
    pub standardize_inputs: bool,
    pub output_scaling: OutputScaling,
    /// Largest diagonal jitter tried, relative to the kernel variance, when
    /// the Gram matrix is numerically singular.
    pub max_jitter: T,
    /// Candidate length scales for a marginal-likelihood search; empty disables it.
    pub length_scale_grid: Vec<T>,
}

impl<T: Scalar> Default for GpConfig<T> {
    fn default() -> Self {
        GpConfig {
            kernel: KernelSpec::default(),
            noise_variance: T::lit(1e-6),
            standardize_inputs: true,
            output_scaling: OutputScaling::Standardize,
            max_jitter: T::lit(1e-6),
            length_scale_grid: Vec::new(),
        }
    }
}

impl<T: Scalar> GpConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.noise_variance >= T::zero()) || !self.noise_variance.is_finite() {
            return Err(Error::invalid("noise_variance must be finite and >= 0"));
        }
        if !(self.max_jitter >= T::zero()) || !self.max_jitter.is_finite() {
            return Err(Error::invalid("max_jitter must be finite and >= 0"));
        }
        if self.length_scale_grid.iter().any(|&l| !(l > T::zero()) || !l.is_finite()) {
            return Err(Error::invalid("length_scale_grid entries must be positive"));
        }
        Ok(())
    }
}

/// Per-dimension affine map `z = (x - shift) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Affine<T> {
    pub shift: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> Affine<T> {
    pub fn identity(dim: usize) -> Self {
        Affine { shift: vec![T::zero(); dim], scale: vec![T::one(); dim] }
    }

    /// Zero mean, unit (population) variance per column; constant columns keep scale 1.
    pub fn standardizing(rows: &[Vec<T>], dim: usize) -> Self {
        let n = T::from_usize_lossy(rows.len());
        let mut shift = vec![T::zero(); dim];
        let mut scale = vec![T::one(); dim];
        if rows.is_empty() {
            return Affine { shift, scale };
        }
        for j in 0..dim {
            let mean = rows.iter().map(|r| r[j]).sum::<T>() / n;
            let var = rows.iter().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<T>() / n;
            let sd = var.sqrt();
            shift[j] = mean;
            if sd > T::epsilon() * mean.abs().max(T::one()) {
                scale[j] = sd;
            }
        }
        Affine { shift, scale }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TargetScaler<T> {
    pub shift: T,
    pub scale: T,
}

impl<T: Scalar> TargetScaler<T> {
    fn identity() -> Self {
        TargetScaler { shift: T::zero(), scale: T::one() }
    }

    fn fit(y: &[T], mode: OutputScaling) -> Self {
        if mode == OutputScaling::None || y.is_empty() {
            return Self::identity();
        }
        let n = T::from_usize_lossy(y.len());
        let mean = y.iter().copied().sum::<T>() / n;
        let var = y.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let sd = var.sqrt();
        let scale = if sd > T::epsilon() * mean.abs().max(T::one()) { sd } else { T::one() };
        TargetScaler { shift: mean, scale }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Posterior<T> {
    pub mean: T,
    pub std: T,
}

/// Fitted regressor. Immutable once built apart from [`GpModel::push`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GpModel<T> {
    kernel: KernelSpec<T>,
    noise_variance: T,
    /// Extra diagonal term added to make the factorization succeed.
    jitter: T,
    max_jitter: T,
    output_scaling: OutputScaling,
    input_scaler: Affine<T>,
    target_scaler: TargetScaler<T>,
    /// Standardized training inputs.
    x_train: Vec<Vec<T>>,
    /// Raw training targets.
    y_train: Vec<T>,
    chol: Cholesky<T>,
    /// (K + σ²I)⁻¹ ỹ with ỹ the scaled targets.
    weights: Vec<T>,
    #[serde(skip)]
    generation: u64,
}

/// A query point whose kernel column and triangular solve are kept between
/// model updates, so that re-scoring it after [`GpModel::push`] costs O(n).
#[derive(Debug, Clone)]
pub struct CachedPoint<T> {
    z: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    generation: u64,
}

impl<T: Scalar> GpModel<T> {
    /// Zero-data model: the prior of the configured kernel.
    pub fn prior(dim: usize, cfg: &GpConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(GpModel {
            kernel: cfg.kernel.clone(),
            noise_variance: cfg.noise_variance,
            jitter: T::zero(),
            max_jitter: cfg.max_jitter,
            output_scaling: cfg.output_scaling,
            input_scaler: Affine::identity(dim),
            target_scaler: TargetScaler::identity(),
            x_train: Vec::new(),
            y_train: Vec::new(),
            chol: Cholesky::empty(),
            weights: Vec::new(),
            generation: 0,
        })
    }

    pub fn fit(x: &[Vec<T>], y: &[T], cfg: &GpConfig<T>) -> Result<Self> {
        cfg.validate()?;
        if x.is_empty() {
            return Err(Error::invalid("at least one training point is required"));
        }
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        let dim = x[0].len();
        if dim == 0 {
            return Err(Error::invalid("training inputs must have at least one dimension"));
        }
        for row in x {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("training inputs must be finite"));
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("training targets must be finite"));
        }

        let input_scaler = if cfg.standardize_inputs {
            Affine::standardizing(x, dim)
        } else {
            Affine::identity(dim)
        };
        let z: Vec<Vec<T>> = x.iter().map(|r| input_scaler.apply(r)).collect();

        let build = |kernel: KernelSpec<T>| -> Result<Self> {
            let mut m = GpModel {
                kernel,
                noise_variance: cfg.noise_variance,
                jitter: T::zero(),
                max_jitter: cfg.max_jitter,
                output_scaling: cfg.output_scaling,
                input_scaler: input_scaler.clone(),
                target_scaler: TargetScaler::identity(),
                x_train: z.clone(),
                y_train: y.to_vec(),
                chol: Cholesky::empty(),
                weights: Vec::new(),
                generation: 0,
            };
            m.refactor()?;
            Ok(m)
        };

        if cfg.length_scale_grid.is_empty() {
            return build(cfg.kernel.clone());
        }
        let mut best: Option<(T, Self)> = None;
        let mut last_err = None;
        for &ell in &cfg.length_scale_grid {
            match build(cfg.kernel.with_length_scale(ell)) {
                Ok(m) => {
                    let lml = m.log_marginal_likelihood();
                    if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                        best = Some((lml, m));
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        match (best, last_err) {
            (Some((_, m)), _) => Ok(m),
            (None, Some(e)) => Err(e),
            (None, None) => unreachable!("non-empty grid yields a model or an error"),
        }
    }

    /// Rebuilds the factor from scratch, escalating jitter on failure.
    fn refactor(&mut self) -> Result<()> {
        let n = self.x_train.len();
        let kdiag = self.kernel.diag();
        let mut jitter = T::zero();
        let mut next = T::lit(1e-12) * kdiag;
        let limit = self.max_jitter * kdiag;
        let chol = loop {
            let diag = kdiag + self.noise_variance + jitter;
            let x = &self.x_train;
            let kern = &self.kernel;
            match Cholesky::factor(n, |i, j| {
                if i == j { diag } else { kern.eval_sq_dist(kernel::sq_dist(&x[i], &x[j])) }
            }) {
                Ok(c) => break c,
                Err(e) if next > limit => return Err(e),
                Err(_) => {
                    jitter = next;
                    next *= T::lit(10.0);
                }
            }
        };
        self.chol = chol;
        self.jitter = jitter;
        self.generation += 1;
        self.solve_weights();
        Ok(())
    }

    fn solve_weights(&mut self) {
        self.target_scaler = TargetScaler::fit(&self.y_train, self.output_scaling);
        let s = self.target_scaler;
        let mut w: Vec<T> = self.y_train.iter().map(|&v| (v - s.shift) / s.scale).collect();
        self.chol.forward_in_place(&mut w);
        self.chol.backward_in_place(&mut w);
        self.weights = w;
    }

    /// Adds one observation, keeping the input transform of the original fit.
    /// Returns true when the factor had to be rebuilt from scratch.
    pub fn push(&mut self, x: &[T], y: T) -> Result<bool> {
        self.check_dim(x)?;
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("observation must be finite"));
        }
        let z = self.input_scaler.apply(x);
        let col: Vec<T> = self
            .x_train
            .iter()
            .map(|xi| self.kernel.eval_sq_dist(kernel::sq_dist(xi, &z)))
            .collect();
        let diag = self.kernel.diag() + self.noise_variance + self.jitter;
        self.x_train.push(z);
        self.y_train.push(y);
        let rebuilt = match self.chol.push(&col, diag) {
            Ok(()) => false,
            Err(_) => {
                if let Err(e) = self.refactor() {
                    self.x_train.pop();
                    self.y_train.pop();
                    self.refactor()?;
                    return Err(e);
                }
                true
            }
        };
        if !rebuilt {
            self.solve_weights();
        }
        Ok(rebuilt)
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.input_scaler.dim()
    }

    pub fn len(&self) -> usize {
        self.y_train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_train.is_empty()
    }

    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.kernel
    }

    pub fn noise_variance(&self) -> T {
        self.noise_variance
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn chol(&self) -> &Cholesky<T> {
        &self.chol
    }

    pub fn x_train(&self) -> &[Vec<T>] {
        &self.x_train
    }

    pub fn y_train(&self) -> &[T] {
        &self.y_train
    }

    pub fn input_scaler(&self) -> &Affine<T> {
        &self.input_scaler
    }

    pub fn target_scaler(&self) -> TargetScaler<T> {
        self.target_scaler
    }

    /// log p(ỹ | X) of the scaled targets.
    pub fn log_marginal_likelihood(&self) -> T {
        let s = self.target_scaler;
        let half = T::lit(0.5);
        let fit: T = self
            .y_train
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| (y - s.shift) / s.scale * w)
            .sum();
        let n = T::from_usize_lossy(self.len());
        -half * fit - half * self.chol.log_det() - half * n * (T::lit(2.0) * T::PI()).ln()
    }

    fn cross(&self, z: &[T]) -> Vec<T> {
        self.x_train
            .iter()
            .map(|xi| self.kernel.eval_sq_dist(kernel::sq_dist(xi, z)))
            .collect()
    }

    fn finish(&self, k: &[T], v: &[T]) -> Posterior<T> {
        let mean_s: T = k.iter().zip(&self.weights).map(|(&a, &b)| a * b).sum();
        let explained: T = v.iter().map(|&a| a * a).sum();
        let var = (self.kernel.diag() - explained).max(T::zero());
        let s = self.target_scaler;
        Posterior { mean: s.shift + s.scale * mean_s, std: s.scale * var.sqrt() }
    }

    pub fn predict(&self, x: &[T]) -> Result<Posterior<T>> {
        self.check_dim(x)?;
        let z = self.input_scaler.apply(x);
        let k = self.cross(&z);
        let mut v = k.clone();
        self.chol.forward_in_place(&mut v);
        Ok(self.finish(&k, &v))
    }

    pub fn predict_mean(&self, x: &[T]) -> Result<T> {
        self.check_dim(x)?;
        let z = self.input_scaler.apply(x);
        let mean_s: T = self
            .x_train
            .iter()
            .zip(&self.weights)
            .map(|(xi, &w)| self.kernel.eval_sq_dist(kernel::sq_dist(xi, &z)) * w)
            .sum();
        let s = self.target_scaler;
        Ok(s.shift + s.scale * mean_s)
    }

    pub fn cache_point(&self, x: &[T]) -> Result<CachedPoint<T>> {
        self.check_dim(x)?;
        let mut c = CachedPoint {
            z: self.input_scaler.apply(x),
            k: Vec::new(),
            v: Vec::new(),
            generation: self.generation,
        };
        self.refresh(&mut c);
        Ok(c)
    }

    /// Brings a cached point up to date with the current training set.
    pub fn refresh(&self, c: &mut CachedPoint<T>) {
        let n = self.len();
        if c.generation != self.generation || c.k.len() > n {
            c.v.clear();
            c.generation = self.generation;
        }
        if c.k.len() > n {
            c.k.truncate(n);
        }
        let start = c.k.len();
        for xi in &self.x_train[start..] {
            c.k.push(self.kernel.eval_sq_dist(kernel::sq_dist(xi, &c.z)));
        }
        let have = c.v.len();
        self.chol.extend_forward(&mut c.v, &c.k[have..]);
    }

    /// Posterior at a cached point; call [`GpModel::refresh`] first after updates.
    pub fn predict_cached(&self, c: &CachedPoint<T>) -> Posterior<T> {
        debug_assert_eq!(c.k.len(), self.len());
        self.finish(&c.k, &c.v)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = io::read_json(path)?;
        m.kernel.validate()?;
        let n = m.y_train.len();
        if m.x_train.len() != n || m.weights.len() != n || m.chol.dim() != n {
            return Err(Error::invalid(format!("{}: inconsistent model sizes", path.display())));
        }
        if m.x_train.iter().any(|r| r.len() != m.input_scaler.dim()) {
            return Err(Error::invalid(format!("{}: inconsistent input dimension", path.display())));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_cfg(noise: f64) -> GpConfig<f64> {
        GpConfig {
            noise_variance: noise,
            standardize_inputs: false,
            output_scaling: OutputScaling::None,
            ..GpConfig::default()
        }
    }

    #[test]
    fn single_point_weight() {
        let m = GpModel::fit(&[vec![0.2, 0.4, 0.1]], &[3.5], &raw_cfg(0.0)).unwrap();
        assert_eq!(m.weights(), &[3.5]);
    }

    #[test]
    fn zero_targets_give_zero_weights() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![0.3, 2.0]];
        let m = GpModel::fit(&x, &[0.0; 3], &GpConfig::default()).unwrap();
        assert!(m.weights().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn interpolates_training_points() {
        let x = vec![vec![0.0], vec![1.0], vec![2.5]];
        let y = [1.0, -2.0, 0.5];
        let m = GpModel::fit(&x, &y, &raw_cfg(0.0)).unwrap();
        for (xi, &yi) in x.iter().zip(&y) {
            let p = m.predict(xi).unwrap();
            assert!((p.mean - yi).abs() < 1e-8);
            assert!(p.std < 1e-6);
        }
    }

    #[test]
    fn prior_prediction() {
        let m = GpModel::prior(3, &GpConfig::<f64>::default()).unwrap();
        let p = m.predict(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.mean, 0.0);
        assert_eq!(p.std, 1.0);
    }

    #[test]
    fn duplicate_rows_need_jitter() {
        let x = vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0, 0.0]];
        let m = GpModel::fit(&x, &[1.0, 1.0, 2.0], &raw_cfg(0.0)).unwrap();
        assert!(m.jitter() > 0.0);
        let strict = GpConfig { max_jitter: 0.0, ..raw_cfg(0.0) };
        assert!(matches!(GpModel::fit(&x, &[1.0, 1.0, 2.0], &strict), Err(Error::Factorization(_))));
    }

    #[test]
    fn push_matches_refit() {
        let x = vec![vec![0.1, 0.2], vec![0.9, 0.4], vec![0.5, 0.8], vec![0.3, 0.3]];
        let y = [1.0_f64, 2.0, 0.5, -1.0];
        let cfg = GpConfig { standardize_inputs: false, ..GpConfig::default() };
        let full = GpModel::fit(&x, &y, &cfg).unwrap();
        let mut inc = GpModel::fit(&x[..2], &y[..2], &cfg).unwrap();
        let mut cached = inc.cache_point(&[0.4, 0.6]).unwrap();
        for i in 2..4 {
            assert!(!inc.push(&x[i], y[i]).unwrap());
        }
        inc.refresh(&mut cached);
        let a = full.predict(&[0.4, 0.6]).unwrap();
        let b = inc.predict_cached(&cached);
        let c = inc.predict(&[0.4, 0.6]).unwrap();
        assert!((a.mean - b.mean).abs() < 1e-10 && (a.std - b.std).abs() < 1e-10);
        assert_eq!(b, c);
    }

    #[test]
    fn grid_search_picks_a_grid_value() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| (6.0 * r[0]).sin()).collect();
        let cfg = GpConfig { length_scale_grid: vec![0.05, 0.5, 5.0], ..GpConfig::default() };
        let m = GpModel::fit(&x, &y, &cfg).unwrap();
        assert_eq!(m.kernel(), &KernelSpec::rbf(0.5));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(GpModel::fit(&[], &[], &GpConfig::<f64>::default()).is_err());
        assert!(GpModel::fit(&[vec![1.0]], &[1.0, 2.0], &GpConfig::default()).is_err());
        let m = GpModel::fit(&[vec![1.0, 2.0]], &[1.0], &GpConfig::default()).unwrap();
        assert!(matches!(m.predict(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let x = vec![vec![0.1, 7.0], vec![0.7, 3.0], vec![0.4, 5.5]];
        let m = GpModel::fit(&x, &[1.0 / 3.0, 2.0, 0.7], &GpConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        let back = GpModel::<f64>::load(&path).unwrap();
        let q = [0.33, 4.1];
        assert_eq!(m.predict(&q).unwrap(), back.predict(&q).unwrap());
    }
}
