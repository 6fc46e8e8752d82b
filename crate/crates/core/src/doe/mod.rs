//! Design of experiments over the manufacturing space: Sobol'/Saltelli
//! blocks for dataset generation and Latin hypercubes for optimizer
//! initialization.

mod lhs;
mod saltelli;
mod sobol;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use lhs::latin_hypercube;
pub use saltelli::{saltelli_expand, SaltelliOrder};
pub use sobol::{sobol_sequence, MAX_DIMENSION as SOBOL_MAX_DIMENSION};

use crate::electrode::ManufacturingParams;
use crate::error::{Error, Result};
use crate::io;
use crate::scalar::Scalar;

/// A point of the unit hypercube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitPoint<T>(Vec<T>);

impl<T: Scalar> UnitPoint<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("unit point needs at least one coordinate"));
        }
        if let Some(c) = coords.iter().find(|&&c| !(c >= T::zero() && c <= T::one())) {
            return Err(Error::invalid(format!("unit coordinate {c} outside [0, 1]")));
        }
        Ok(Self(coords))
    }

    pub(crate) fn new_unchecked(coords: Vec<T>) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[T] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterBound<T> {
    pub name: String,
    pub lower: T,
    pub upper: T,
}

/// Box constraints of the search space, one entry per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterBounds<T>(Vec<ParameterBound<T>>);

impl<T: Scalar> ParameterBounds<T> {
    pub fn new(bounds: Vec<ParameterBound<T>>) -> Result<Self> {
        let b = Self(bounds);
        b.validate()?;
        Ok(b)
    }

    /// Build from `(name, lower, upper)` triples.
    pub fn from_triples(triples: &[(&str, f64, f64)]) -> Result<Self> {
        Self::new(
            triples
                .iter()
                .map(|&(name, lo, hi)| ParameterBound {
                    name: name.to_string(),
                    lower: T::lit(lo),
                    upper: T::lit(hi),
                })
                .collect(),
        )
    }

    /// AM% in [90, 96.8], SC% in [43, 72.8], CD% in [1.4, 38.8].
    pub fn manufacturing_default() -> Self {
        Self::from_triples(&[
            ("am_pct", 90.0, 96.8),
            ("sc_pct", 43.0, 72.8),
            ("cd_pct", 1.4, 38.8),
        ])
        .expect("default bounds are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::Config("parameter bounds are empty".into()));
        }
        for b in &self.0 {
            if !(b.lower.is_finite() && b.upper.is_finite() && b.lower < b.upper) {
                return Err(Error::Config(format!(
                    "bound `{}` needs lower < upper (got [{}, {}])",
                    b.name, b.lower, b.upper
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParameterBound<T>> {
        self.0.iter()
    }

    pub fn get(&self, i: usize) -> &ParameterBound<T> {
        &self.0[i]
    }

    /// `x = lower + u·(upper − lower)` per coordinate; `u = 1` maps exactly onto `upper`.
    pub fn scale(&self, u: &[T]) -> Result<Vec<T>> {
        self.check_dim(u.len())?;
        Ok(self
            .0
            .iter()
            .zip(u)
            .map(|(b, &u)| {
                if u >= T::one() {
                    b.upper
                } else {
                    (b.lower + u * (b.upper - b.lower)).min(b.upper)
                }
            })
            .collect())
    }

    pub fn unscale(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_dim(x.len())?;
        Ok(self
            .0
            .iter()
            .zip(x)
            .map(|(b, &x)| (x - b.lower) / (b.upper - b.lower))
            .collect())
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim() && self.0.iter().zip(x).all(|(b, &v)| v >= b.lower && v <= b.upper)
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

/// Maps unit points onto the three manufacturing parameters.
pub fn scale_to_bounds<T: Scalar>(
    points: &[UnitPoint<T>],
    bounds: &ParameterBounds<T>,
) -> Result<Vec<ManufacturingParams<T>>> {
    if bounds.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: bounds.dim(),
        });
    }
    points
        .iter()
        .map(|p| bounds.scale(p.coords()).map(|x| ManufacturingParams::from_slice(&x)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    SobolSaltelli,
    LatinHypercube,
    Explicit,
}

/// Sidecar describing how a DOE file was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoeMetadata<T> {
    pub generator: Generator,
    pub seed: u64,
    pub skip: u64,
    pub base_samples: usize,
    pub order: SaltelliOrder,
    pub bounds: ParameterBounds<T>,
    pub generated: usize,
    pub duplicates_removed: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOfExperiments<T> {
    pub points: Vec<ManufacturingParams<T>>,
    pub meta: DoeMetadata<T>,
}

impl<T: Scalar> DesignOfExperiments<T> {
    /// Sobol' block of `base_samples` rows over 6 columns, expanded with the
    /// Saltelli scheme and scaled to `bounds`. Exact duplicates are dropped.
    pub fn sobol_saltelli(
        bounds: &ParameterBounds<T>,
        base_samples: usize,
        skip: u64,
        order: SaltelliOrder,
    ) -> Result<Self> {
        if base_samples == 0 {
            return Err(Error::invalid("Saltelli base sample count must be >= 1"));
        }
        let d = bounds.dim();
        let base = sobol_sequence::<T>(2 * d, base_samples, skip)?;
        let unit = saltelli_expand(&base, d, order)?;
        let generated = unit.len();
        let mut points = Vec::with_capacity(generated);
        for p in scale_to_bounds(&unit, bounds)? {
            if !points.contains(&p) {
                points.push(p);
            }
        }
        let duplicates_removed = generated - points.len();
        Ok(Self {
            points,
            meta: DoeMetadata {
                generator: Generator::SobolSaltelli,
                seed: 0,
                skip,
                base_samples,
                order,
                bounds: bounds.clone(),
                generated,
                duplicates_removed,
                rejected: 0,
            },
        })
    }

    pub fn latin_hypercube(bounds: &ParameterBounds<T>, n: usize, seed: u64) -> Result<Self> {
        let unit = latin_hypercube::<T>(n, bounds.dim(), seed)?;
        let points = scale_to_bounds(&unit, bounds)?;
        Ok(Self {
            meta: DoeMetadata {
                generator: Generator::LatinHypercube,
                seed,
                skip: 0,
                base_samples: n,
                order: SaltelliOrder::First,
                bounds: bounds.clone(),
                generated: n,
                duplicates_removed: 0,
                rejected: 0,
            },
            points,
        })
    }

    pub fn explicit(bounds: &ParameterBounds<T>, points: Vec<ManufacturingParams<T>>) -> Self {
        let n = points.len();
        Self {
            points,
            meta: DoeMetadata {
                generator: Generator::Explicit,
                seed: 0,
                skip: 0,
                base_samples: n,
                order: SaltelliOrder::First,
                bounds: bounds.clone(),
                generated: n,
                duplicates_removed: 0,
                rejected: 0,
            },
        }
    }

    /// Keeps only points for which `keep` returns `Ok`; returns the rejected
    /// points with their reasons.
    pub fn retain_feasible<F>(&mut self, mut keep: F) -> Vec<(ManufacturingParams<T>, String)>
    where
        F: FnMut(&ManufacturingParams<T>) -> Result<()>,
    {
        let mut rejected = Vec::new();
        self.points.retain(|p| match keep(p) {
            Ok(()) => true,
            Err(e) => {
                rejected.push((*p, e.to_string()));
                false
            }
        });
        self.meta.rejected += rejected.len();
        rejected
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with header `am_pct,sc_pct,cd_pct`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = io::csv_writer(path)?;
        w.write_record(["am_pct", "sc_pct", "cd_pct"])?;
        for p in &self.points {
            w.write_record([p.am_pct.to_string(), p.sc_pct.to_string(), p.cd_pct.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_metadata(&self, path: &Path) -> Result<()> {
        io::write_json(path, &self.meta)
    }

    /// Reads a DOE CSV; malformed rows are reported with their file line.
    pub fn read_csv(path: &Path, bounds: &ParameterBounds<T>) -> Result<Self> {
        let rows = io::read_numeric_csv::<T>(path, &["am_pct", "sc_pct", "cd_pct"])?;
        let points = rows
            .into_iter()
            .map(|r| ManufacturingParams::from_slice(&r))
            .collect();
        Ok(Self::explicit(bounds, points))
    }
}
