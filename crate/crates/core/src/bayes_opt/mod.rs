//! Sequential Bayesian minimization over a box.
//!
//! The search runs in the unit cube. The cost surrogate sees
//! `z = (u − 1/2)·√12`, the standardization of a uniform variable on the
//! box, so a unit length scale means the same thing as for the property
//! regressors.

mod acquisition;

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doe::{latin_hypercube, sobol_sequence, ParameterBounds};
use crate::error::{Error, Result};
use crate::gp::{CachedPoint, GpConfig, GpModel, Posterior};
use crate::io;
use crate::objective::ObjectiveSpec;
use crate::scalar::Scalar;
use crate::seed::derive_seed;

pub use acquisition::{
    acquisition_score, expected_improvement, probability_of_improvement, Acquisition, AcquisitionKind,
    AcquisitionSpec,
};

/// Something to minimize at a point given in the bounds' units.
pub trait Objective<T> {
    fn evaluate(&self, x: &[T]) -> Result<T>;
}

impl<T, F> Objective<T> for F
where
    F: Fn(&[T]) -> Result<T>,
{
    fn evaluate(&self, x: &[T]) -> Result<T> {
        self(x)
    }
}

impl<T: Scalar> Objective<T> for ObjectiveSpec<T> {
    fn evaluate(&self, x: &[T]) -> Result<T> {
        self.cost(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound = "T: Scalar")]
pub struct BoConfig<T> {
    /// Iterations after the initial design.
    pub budget: usize,
    pub n_init: usize,
    /// Stop once the best value is at or below `threshold`.
    pub early_stop: bool,
    pub threshold: T,
    pub acquisition: AcquisitionSpec<T>,
    /// Size of the fixed Sobol candidate set.
    pub candidate_count: usize,
    /// Gaussian perturbations of the incumbent per entry of `local_scales`.
    pub local_samples: usize,
    /// Perturbation standard deviations, in unit-cube lengths.
    pub local_scales: Vec<T>,
    pub surrogate: GpConfig<T>,
}

impl<T: Scalar> Default for BoConfig<T> {
    fn default() -> Self {
        BoConfig {
            budget: 300,
            n_init: 10,
            early_stop: true,
            threshold: T::lit(1e-4),
            acquisition: AcquisitionSpec::default(),
            candidate_count: 4096,
            local_samples: 32,
            local_scales: [0.1, 0.03, 0.01, 0.003, 0.001].iter().map(|&s| T::lit(s)).collect(),
            surrogate: GpConfig { standardize_inputs: false, ..GpConfig::default() },
        }
    }
}

impl<T: Scalar> BoConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::invalid("budget must be at least 1"));
        }
        if self.n_init < 2 {
            return Err(Error::invalid("n_init must be at least 2"));
        }
        if self.candidate_count == 0 {
            return Err(Error::invalid("candidate_count must be positive"));
        }
        if !self.threshold.is_finite() {
            return Err(Error::invalid("threshold must be finite"));
        }
        if self.local_scales.iter().any(|&s| !(s > T::zero()) || !s.is_finite()) {
            return Err(Error::invalid("local_scales must be positive"));
        }
        self.acquisition.validate()?;
        self.surrogate.validate()
    }
}

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TraceEntry<T> {
    /// 0 for the initial design, then 1, 2, ...
    pub iteration: usize,
    /// Rule that proposed the point; absent for the initial design.
    pub acquisition: Option<Acquisition>,
    pub x: Vec<T>,
    /// Objective value; absent when the evaluation failed (treated as +∞).
    pub value: Option<T>,
    /// Best value over all evaluations so far.
    pub best: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Threshold,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BoResult<T> {
    pub names: Vec<String>,
    pub x_best: Vec<T>,
    pub c_best: T,
    pub iterations: usize,
    pub stop: StopReason,
    pub trace: Vec<TraceEntry<T>>,
}

impl<T: Scalar> BoResult<T> {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    /// `iteration,acquisition,<names...>,value,best` per evaluation.
    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let mut w = io::csv_writer(path)?;
        let mut header = vec!["iteration".to_owned(), "acquisition".to_owned()];
        header.extend(self.names.iter().cloned());
        header.extend(["value".to_owned(), "best".to_owned()]);
        w.write_record(&header)?;
        let opt = |v: Option<T>| v.map_or_else(|| "inf".to_owned(), |v| v.to_string());
        for e in &self.trace {
            let mut rec = vec![
                e.iteration.to_string(),
                e.acquisition.map_or("init", Acquisition::name).to_owned(),
            ];
            rec.extend(e.x.iter().map(|v| v.to_string()));
            rec.push(opt(e.value));
            rec.push(opt(e.best));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn to_surrogate<T: Scalar>(u: &[T]) -> Vec<T> {
    let half = T::lit(0.5);
    let s = T::lit(12.0).sqrt();
    u.iter().map(|&v| (v - half) * s).collect()
}

fn key<T: Scalar>(u: &[T]) -> Vec<u64> {
    u.iter().map(|v| v.as_f64().to_bits()).collect()
}

struct Candidate<T> {
    u: Vec<T>,
    cache: Option<CachedPoint<T>>,
}

/// Loop state: evaluations so far, the cost surrogate and the candidate pool.
pub struct BoState<'a, T: Scalar> {
    bounds: &'a ParameterBounds<T>,
    cfg: &'a BoConfig<T>,
    rng: ChaCha8Rng,
    units: Vec<Vec<T>>,
    trace: Vec<TraceEntry<T>>,
    seen: HashSet<Vec<u64>>,
    best: Option<usize>,
    surrogate: Option<GpModel<T>>,
    pool: Vec<Candidate<T>>,
    iteration: usize,
}

/// A point chosen by the acquisition rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal<T> {
    pub unit: Vec<T>,
    pub x: Vec<T>,
    pub acquisition: Acquisition,
}

impl<'a, T: Scalar> BoState<'a, T> {
    pub fn new(bounds: &'a ParameterBounds<T>, cfg: &'a BoConfig<T>, seed: u64) -> Result<Self> {
        cfg.validate()?;
        bounds.validate()?;
        let pool = sobol_sequence::<T>(bounds.dim(), cfg.candidate_count, 0)?
            .into_iter()
            .map(|p| Candidate { u: p.into_inner(), cache: None })
            .collect();
        Ok(BoState {
            bounds,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, "bo-proposal", 0)),
            units: Vec::new(),
            trace: Vec::new(),
            seen: HashSet::new(),
            best: None,
            surrogate: None,
            pool,
            iteration: 0,
        })
    }

    pub fn trace(&self) -> &[TraceEntry<T>] {
        &self.trace
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn best_value(&self) -> Option<T> {
        self.best.and_then(|i| self.trace[i].value)
    }

    pub fn surrogate(&self) -> Option<&GpModel<T>> {
        self.surrogate.as_ref()
    }

    pub fn is_evaluated(&self, unit: &[T]) -> bool {
        self.seen.contains(&key(unit))
    }

    /// Evaluates `objective` at a unit-cube point and records the outcome.
    pub fn observe<O: Objective<T> + ?Sized>(
        &mut self,
        unit: Vec<T>,
        acquisition: Option<Acquisition>,
        objective: &O,
    ) -> Result<()> {
        let x = self.bounds.scale(&unit)?;
        let (value, error) = match objective.evaluate(&x) {
            Ok(v) if v.is_finite() => (Some(v), None),
            Ok(v) => (None, Some(format!("non-finite objective value {v}"))),
            Err(e) => (None, Some(e.to_string())),
        };
        let mut best = self.best_value();
        if let Some(v) = value {
            if best.is_none_or(|b| v < b) {
                best = Some(v);
                self.best = Some(self.trace.len());
            }
            let z = to_surrogate(&unit);
            match self.surrogate.as_mut() {
                Some(m) => {
                    m.push(&z, v)?;
                }
                None => {
                    self.surrogate = Some(GpModel::fit(&[z], &[v], &self.cfg.surrogate)?);
                }
            }
        }
        self.seen.insert(key(&unit));
        self.units.push(unit);
        self.trace.push(TraceEntry {
            iteration: self.iteration,
            acquisition,
            x,
            value,
            best,
            error,
        });
        Ok(())
    }

    fn local_candidates(&mut self) -> Vec<Vec<T>> {
        let Some(b) = self.best else { return Vec::new() };
        let center = self.units[b].clone();
        let d = center.len();
        let clamp = |v: T| v.max(T::zero()).min(T::one());
        let mut out = Vec::new();
        for &scale in &self.cfg.local_scales {
            for _ in 0..self.cfg.local_samples {
                out.push(
                    center
                        .iter()
                        .map(|&c| clamp(c + scale * T::lit(self.rng.sample::<f64, _>(StandardNormal))))
                        .collect(),
                );
            }
        }
        // copies of the incumbent with coordinates moved onto the faces
        if d <= 6 {
            let total = 3usize.pow(d as u32);
            for code in 1..total {
                let mut c = center.clone();
                let mut k = code;
                for v in c.iter_mut() {
                    match k % 3 {
                        1 => *v = T::zero(),
                        2 => *v = T::one(),
                        _ => {}
                    }
                    k /= 3;
                }
                out.push(c);
            }
        } else {
            for j in 0..d {
                for edge in [T::zero(), T::one()] {
                    let mut c = center.clone();
                    c[j] = edge;
                    out.push(c);
                }
            }
        }
        out
    }

    /// Chooses the next point to evaluate.
    pub fn propose(&mut self) -> Result<Proposal<T>> {
        let acquisition = self.cfg.acquisition.choose(&mut self.rng);
        let local = self.local_candidates();
        let kappa = self.cfg.acquisition.kappa;
        let fitted = self.surrogate.as_ref().filter(|m| m.len() >= 2);

        let chosen = match (fitted, self.best_value()) {
            (Some(model), Some(f_best)) => {
                let score = |p: Posterior<T>| acquisition_score(acquisition, p, f_best, kappa);
                self.pool.par_iter_mut().try_for_each(|c| -> Result<()> {
                    match c.cache.as_mut() {
                        Some(cache) => model.refresh(cache),
                        None => c.cache = Some(model.cache_point(&to_surrogate(&c.u))?),
                    }
                    Ok(())
                })?;
                let pool_scores: Vec<Option<T>> = self
                    .pool
                    .par_iter()
                    .map(|c| {
                        let cache = c.cache.as_ref().expect("refreshed above");
                        (!self.seen.contains(&key(&c.u))).then(|| score(model.predict_cached(cache)))
                    })
                    .collect();
                let local_scores: Vec<Option<T>> = local
                    .par_iter()
                    .map(|u| -> Result<Option<T>> {
                        if self.seen.contains(&key(u)) {
                            return Ok(None);
                        }
                        Ok(Some(score(model.predict(&to_surrogate(u))?)))
                    })
                    .collect::<Result<_>>()?;
                let mut best: Option<(T, Vec<T>)> = None;
                let units = self.pool.iter().map(|c| &c.u).chain(local.iter());
                for (u, s) in units.zip(pool_scores.into_iter().chain(local_scores)) {
                    if let Some(s) = s.filter(|s| s.is_finite()) {
                        if best.as_ref().is_none_or(|(b, _)| s < *b) {
                            best = Some((s, u.clone()));
                        }
                    }
                }
                best.map(|(_, u)| u)
            }
            // too little data for a surrogate: fill space in Sobol order
            _ => self.pool.iter().find(|c| !self.seen.contains(&key(&c.u))).map(|c| c.u.clone()),
        };

        let unit = match chosen {
            Some(u) => u,
            None => self.random_unseen().ok_or(Error::CandidatesExhausted)?,
        };
        let x = self.bounds.scale(&unit)?;
        Ok(Proposal { unit, x, acquisition })
    }

    fn random_unseen(&mut self) -> Option<Vec<T>> {
        let d = self.bounds.dim();
        for _ in 0..64 {
            let u: Vec<T> = (0..d).map(|_| T::lit(self.rng.random::<f64>())).collect();
            if !self.seen.contains(&key(&u)) {
                return Some(u);
            }
        }
        None
    }

    fn reached_threshold(&self) -> bool {
        self.cfg.early_stop && self.best_value().is_some_and(|b| b <= self.cfg.threshold)
    }
}

/// Minimizes `objective` over `bounds`: Latin-hypercube start, then one
/// surrogate-guided evaluation per iteration until the budget or threshold.
pub fn optimize<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    bounds: &ParameterBounds<T>,
    cfg: &BoConfig<T>,
    seed: u64,
) -> Result<BoResult<T>> {
    let mut state = BoState::new(bounds, cfg, seed)?;
    for p in latin_hypercube::<T>(cfg.n_init, bounds.dim(), derive_seed(seed, "bo-init", 0))? {
        state.observe(p.into_inner(), None, objective)?;
    }
    let mut stop = StopReason::Budget;
    while state.iteration < cfg.budget {
        if state.reached_threshold() {
            stop = StopReason::Threshold;
            break;
        }
        state.iteration += 1;
        let prop = state.propose()?;
        state.observe(prop.unit, Some(prop.acquisition), objective)?;
    }
    if stop == StopReason::Budget && state.reached_threshold() && state.iteration < cfg.budget {
        stop = StopReason::Threshold;
    }
    let best = state.best.ok_or_else(|| Error::invalid("every objective evaluation failed"))?;
    let entry = &state.trace[best];
    Ok(BoResult {
        names: bounds.iter().map(|b| b.name.clone()).collect(),
        x_best: entry.x.clone(),
        c_best: entry.value.expect("best entry has a value"),
        iterations: state.iteration,
        stop,
        trace: state.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(d: usize) -> ParameterBounds<f64> {
        let names = ["a", "b", "c", "d"];
        let t: Vec<(&str, f64, f64)> = names[..d].iter().map(|&n| (n, 0.0, 1.0)).collect();
        ParameterBounds::from_triples(&t).unwrap()
    }

    #[test]
    fn constant_objective_runs_to_budget() {
        let b = unit_box(2);
        let cfg = BoConfig { budget: 8, candidate_count: 64, early_stop: false, ..BoConfig::default() };
        let r = optimize(&|_: &[f64]| Ok(0.7), &b, &cfg, 1).unwrap();
        assert_eq!(r.c_best, 0.7);
        assert_eq!(r.stop, StopReason::Budget);
        assert_eq!(r.trace.len(), 18);
        assert!(r.trace.iter().any(|e| e.x == r.x_best));
    }

    #[test]
    fn threshold_stops_early() {
        let b = unit_box(2);
        let cfg = BoConfig { candidate_count: 256, threshold: 0.5, ..BoConfig::default() };
        let r = optimize(&|x: &[f64]| Ok(x[0] + x[1]), &b, &cfg, 4).unwrap();
        assert_eq!(r.stop, StopReason::Threshold);
        assert!(r.c_best <= 0.5);
        assert!(r.iterations < 300);
    }

    #[test]
    fn failures_are_recorded_and_skipped() {
        let b = unit_box(2);
        let cfg = BoConfig { budget: 15, candidate_count: 128, early_stop: false, ..BoConfig::default() };
        let f = |x: &[f64]| if x[0] > 0.5 { Err(Error::invalid("boom")) } else { Ok((x[1] - 0.3).powi(2)) };
        let r = optimize(&f, &b, &cfg, 2).unwrap();
        assert!(r.trace.iter().any(|e| e.value.is_none() && e.error.is_some()));
        assert!(r.x_best[0] <= 0.5);
    }

    #[test]
    fn best_is_monotone_and_points_in_bounds() {
        let b = unit_box(3);
        let cfg = BoConfig { budget: 30, candidate_count: 256, early_stop: false, ..BoConfig::default() };
        let f = |x: &[f64]| Ok(x.iter().map(|v| (v - 0.4) * (v - 0.4)).sum::<f64>());
        let r = optimize(&f, &b, &cfg, 5).unwrap();
        let bests: Vec<f64> = r.trace.iter().map(|e| e.best.unwrap()).collect();
        assert!(bests.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.trace.iter().all(|e| b.contains(&e.x)));
        assert_eq!(r.trace.len(), 40);
    }

    #[test]
    fn rejects_bad_config() {
        let b = unit_box(2);
        let f = |_: &[f64]| Ok(0.0);
        assert!(optimize(&f, &b, &BoConfig { n_init: 1, ..BoConfig::default() }, 0).is_err());
        assert!(optimize(&f, &b, &BoConfig { budget: 0, ..BoConfig::default() }, 0).is_err());
    }
}
