//! Weighted scalar cost over the energy and power surrogates.

use serde::{Deserialize, Serialize};

use crate::doe::ParameterBounds;
use crate::electrode::ManufacturingParams;
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Energy,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound = "T: Scalar")]
pub struct Range<T> {
    pub min: T,
    pub max: T,
}

impl<T: Scalar> Range<T> {
    fn of(values: &[T]) -> Result<Self> {
        let mut it = values.iter().copied().filter(|v| v.is_finite());
        let first = it.next().ok_or_else(|| Error::invalid("no finite values to scale"))?;
        let (min, max) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let r = Range { min, max };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        if !(self.min < self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::invalid(format!("degenerate scaling range [{}, {}]", self.min, self.max)));
        }
        Ok(())
    }

    fn include(&mut self, v: T) {
        if v.is_finite() {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        }
    }

    /// `(v − min)/(max − min)` clipped to `[0, 1]`.
    pub fn apply(&self, v: T) -> T {
        ((v - self.min) / (self.max - self.min)).max(T::zero()).min(T::one())
    }
}

/// Min–max map of each target onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound = "T: Scalar")]
pub struct FitnessScaler<T> {
    pub energy: Range<T>,
    pub power: Range<T>,
}

impl<T: Scalar> FitnessScaler<T> {
    pub fn fit(energy: &[T], power: &[T]) -> Result<Self> {
        Ok(FitnessScaler { energy: Range::of(energy)?, power: Range::of(power)? })
    }

    /// Extends the ranges so that `(energy, power)` pairs fall inside.
    pub fn widen(&mut self, points: impl IntoIterator<Item = (T, T)>) {
        for (e, p) in points {
            self.energy.include(e);
            self.power.include(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.energy.validate()?;
        self.power.validate()
    }

    pub fn range(&self, target: Target) -> &Range<T> {
        match target {
            Target::Energy => &self.energy,
            Target::Power => &self.power,
        }
    }

    pub fn apply(&self, value: T, target: Target) -> T {
        self.range(target).apply(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMethod {
    Equal,
    RankSum,
    RankExponent,
    RankOrderCentroid,
    Explicit,
}

/// Weights for `n` criteria ranked most to least important.
pub fn rank_weights<T: Scalar>(method: WeightMethod, n: usize, p: T) -> Result<Vec<T>> {
    if n == 0 {
        return Err(Error::invalid("at least one criterion is required"));
    }
    let nt = T::from_usize_lossy(n);
    let w: Vec<T> = match method {
        WeightMethod::Equal => vec![T::one() / nt; n],
        WeightMethod::RankSum => {
            let denom = nt * (nt + T::one());
            (1..=n).map(|i| T::lit(2.0) * T::from_usize_lossy(n + 1 - i) / denom).collect()
        }
        WeightMethod::RankExponent => {
            if !(p >= T::zero()) || !p.is_finite() {
                return Err(Error::invalid(format!("rank-exponent p must be >= 0, got {p}")));
            }
            let raw: Vec<T> = (1..=n).map(|i| T::from_usize_lossy(n - i + 1).powf(p)).collect();
            let total: T = raw.iter().copied().sum();
            raw.into_iter().map(|v| v / total).collect()
        }
        WeightMethod::RankOrderCentroid => (1..=n)
            .map(|i| (i..=n).map(|k| T::one() / T::from_usize_lossy(k)).sum::<T>() / nt)
            .collect(),
        WeightMethod::Explicit => {
            return Err(Error::invalid("explicit weights are given, not derived"));
        }
    };
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound = "T: Scalar")]
pub struct WeightScheme<T> {
    pub method: WeightMethod,
    /// Exponent for `rank-exponent`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<T>,
    pub w_energy: T,
    pub w_power: T,
}

impl<T: Scalar> WeightScheme<T> {
    /// Energy ranked first, power second.
    pub fn from_method(method: WeightMethod, p: Option<T>) -> Result<Self> {
        if method == WeightMethod::RankExponent && p.is_none() {
            return Err(Error::invalid("rank-exponent needs an exponent p"));
        }
        let w = rank_weights(method, 2, p.unwrap_or(T::zero()))?;
        Ok(WeightScheme { method, p, w_energy: w[0], w_power: w[1] })
    }

    pub fn explicit(w_energy: T, w_power: T) -> Result<Self> {
        let s = WeightScheme { method: WeightMethod::Explicit, p: None, w_energy, w_power };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_energy >= T::zero() && self.w_power >= T::zero()) {
            return Err(Error::invalid("weights must be non-negative"));
        }
        if (self.w_energy + self.w_power - T::one()).abs() > T::lit(1e-12) {
            return Err(Error::invalid(format!(
                "weights must sum to 1, got {} + {}",
                self.w_energy, self.w_power
            )));
        }
        if self.method != WeightMethod::Explicit {
            let derived = Self::from_method(self.method, self.p)?;
            let tol = T::lit(1e-12);
            if (derived.w_energy - self.w_energy).abs() > tol || (derived.w_power - self.w_power).abs() > tol {
                return Err(Error::invalid("weights disagree with their method"));
            }
        }
        Ok(())
    }
}

/// Named weight set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound = "T: Scalar")]
pub struct Scenario<T> {
    pub name: String,
    pub weights: WeightScheme<T>,
}

impl<T: Scalar> Scenario<T> {
    /// The five reference weightings, from energy-only to power-only.
    pub fn reference_set() -> Vec<Self> {
        let ex = |name: &str, e: f64, p: f64| Scenario {
            name: name.to_owned(),
            weights: WeightScheme::explicit(T::lit(e), T::lit(p)).expect("reference weights are valid"),
        };
        vec![
            ex("optimal-1c", 1.0, 0.0),
            ex("case-star", 0.875, 0.125),
            Scenario {
                name: "low-c-rate".into(),
                weights: WeightScheme::from_method(WeightMethod::Equal, None).expect("equal weights"),
            },
            ex("case-double-star", 0.125, 0.875),
            ex("ultra-low-c-rate", 0.0, 1.0),
        ]
    }
}

/// `w_E (1 − y_E)² + w_P (1 − y_P)²` on scaled predictions.
pub fn weighted_cost<T: Scalar>(w: &WeightScheme<T>, y_energy: T, y_power: T) -> T {
    let one = T::one();
    w.w_energy * (one - y_energy) * (one - y_energy) + w.w_power * (one - y_power) * (one - y_power)
}

/// Everything needed to evaluate the cost at a manufacturing point.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec<T: Scalar> {
    pub energy_model: GpModel<T>,
    pub power_model: GpModel<T>,
    pub scaler: FitnessScaler<T>,
    pub weights: WeightScheme<T>,
    pub bounds: ParameterBounds<T>,
}

/// Mean predictions at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Prediction<T> {
    pub energy_density: T,
    pub power_density: T,
}

impl<T: Scalar> ObjectiveSpec<T> {
    pub fn new(
        energy_model: GpModel<T>,
        power_model: GpModel<T>,
        scaler: FitnessScaler<T>,
        weights: WeightScheme<T>,
        bounds: ParameterBounds<T>,
    ) -> Result<Self> {
        scaler.validate()?;
        weights.validate()?;
        bounds.validate()?;
        for m in [&energy_model, &power_model] {
            if m.dim() != bounds.dim() {
                return Err(Error::DimensionMismatch { expected: bounds.dim(), got: m.dim() });
            }
        }
        Ok(ObjectiveSpec { energy_model, power_model, scaler, weights, bounds })
    }

    pub fn with_weights(&self, weights: WeightScheme<T>) -> Result<Self> {
        weights.validate()?;
        Ok(ObjectiveSpec { weights, ..self.clone() })
    }

    pub fn predict(&self, x: &[T]) -> Result<Prediction<T>> {
        Ok(Prediction {
            energy_density: self.energy_model.predict_mean(x)?,
            power_density: self.power_model.predict_mean(x)?,
        })
    }

    /// Cost at a point given in the bounds' units (`[am, sc, cd]`).
    pub fn cost(&self, x: &[T]) -> Result<T> {
        if !self.bounds.contains(x) {
            return Err(Error::invalid(format!("point {x:?} outside parameter bounds")));
        }
        let pred = self.predict(x)?;
        Ok(weighted_cost(
            &self.weights,
            self.scaler.apply(pred.energy_density, Target::Energy),
            self.scaler.apply(pred.power_density, Target::Power),
        ))
    }
}

pub fn cost_function<T: Scalar>(x: &ManufacturingParams<T>, spec: &ObjectiveSpec<T>) -> Result<T> {
    spec.cost(&x.to_vec())
}
