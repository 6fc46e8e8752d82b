use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Stationary covariance functions and their sums/products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
#[serde(bound = "T: Scalar")]
pub enum KernelSpec<T> {
    Rbf { length_scale: T },
    Constant { value: T },
    ExpSineSquared { length_scale: T, periodicity: T },
    Sum { children: Vec<KernelSpec<T>> },
    Product { children: Vec<KernelSpec<T>> },
}

impl<T: Scalar> Default for KernelSpec<T> {
    fn default() -> Self {
        KernelSpec::Rbf { length_scale: T::one() }
    }
}

const MAX_DEPTH: usize = 32;

impl<T: Scalar> KernelSpec<T> {
    pub fn rbf(length_scale: T) -> Self {
        KernelSpec::Rbf { length_scale }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at(0)
    }

    fn validate_at(&self, depth: usize) -> Result<()> {
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("kernel {name} must be positive, got {v}")))
            }
        };
        if depth > MAX_DEPTH {
            return Err(Error::invalid("kernel tree too deep"));
        }
        match self {
            KernelSpec::Rbf { length_scale } => positive("length_scale", *length_scale),
            KernelSpec::Constant { value } => positive("value", *value),
            KernelSpec::ExpSineSquared { length_scale, periodicity } => {
                positive("length_scale", *length_scale)?;
                positive("periodicity", *periodicity)
            }
            KernelSpec::Sum { children } | KernelSpec::Product { children } => {
                if children.is_empty() {
                    return Err(Error::invalid("composite kernel needs at least one child"));
                }
                children.iter().try_for_each(|c| c.validate_at(depth + 1))
            }
        }
    }

    pub fn eval(&self, x: &[T], y: &[T]) -> Result<T> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        Ok(self.eval_sq_dist(sq_dist(x, y)))
    }

    /// Kernel value as a function of the squared Euclidean distance.
    pub fn eval_sq_dist(&self, r2: T) -> T {
        let two = T::lit(2.0);
        match self {
            KernelSpec::Rbf { length_scale } => (-r2 / (two * *length_scale * *length_scale)).exp(),
            KernelSpec::Constant { value } => *value,
            KernelSpec::ExpSineSquared { length_scale, periodicity } => {
                let s = (T::PI() * r2.sqrt() / *periodicity).sin();
                (-two * s * s / (*length_scale * *length_scale)).exp()
            }
            KernelSpec::Sum { children } => children.iter().map(|c| c.eval_sq_dist(r2)).sum(),
            KernelSpec::Product { children } => children
                .iter()
                .fold(T::one(), |acc, c| acc * c.eval_sq_dist(r2)),
        }
    }

    /// k(x, x), the prior variance.
    pub fn diag(&self) -> T {
        self.eval_sq_dist(T::zero())
    }

    /// Copy with every length scale in the tree replaced.
    pub fn with_length_scale(&self, ell: T) -> Self {
        match self {
            KernelSpec::Rbf { .. } => KernelSpec::Rbf { length_scale: ell },
            KernelSpec::ExpSineSquared { periodicity, .. } => KernelSpec::ExpSineSquared {
                length_scale: ell,
                periodicity: *periodicity,
            },
            KernelSpec::Constant { value } => KernelSpec::Constant { value: *value },
            KernelSpec::Sum { children } => KernelSpec::Sum {
                children: children.iter().map(|c| c.with_length_scale(ell)).collect(),
            },
            KernelSpec::Product { children } => KernelSpec::Product {
                children: children.iter().map(|c| c.with_length_scale(ell)).collect(),
            },
        }
    }
}

pub(crate) fn sq_dist<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rbf_values() {
        let k = KernelSpec::rbf(1.0_f64);
        assert_eq!(k.eval(&[0.3, -2.0, 5.0], &[0.3, -2.0, 5.0]).unwrap(), 1.0);
        let v = k.eval(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert!((v - (-0.5_f64).exp()).abs() < 1e-15);
        assert!((v - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn sum_and_product() {
        let k = KernelSpec::Sum { children: vec![KernelSpec::Constant { value: 2.0 }, KernelSpec::rbf(1.0)] };
        assert_eq!(k.eval(&[1.0], &[1.0]).unwrap(), 3.0);
        let p = KernelSpec::Product { children: vec![KernelSpec::Constant { value: 2.0 }, KernelSpec::rbf(1.0)] };
        assert!((p.eval(&[0.0], &[1.0]).unwrap() - 2.0 * (-0.5_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn exp_sine_squared_is_periodic() {
        let k = KernelSpec::ExpSineSquared { length_scale: 1.0, periodicity: 2.0 };
        assert!((k.eval(&[0.0], &[2.0]).unwrap() - 1.0_f64).abs() < 1e-12);
        let half = k.eval(&[0.0], &[1.0]).unwrap();
        assert!((half - (-2.0_f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let k = KernelSpec::rbf(1.0_f64);
        assert!(matches!(k.eval(&[0.0], &[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn validation() {
        assert!(KernelSpec::rbf(0.0_f64).validate().is_err());
        assert!(KernelSpec::<f64>::Sum { children: vec![] }.validate().is_err());
        assert!(KernelSpec::rbf(2.0_f64).validate().is_ok());
    }

    #[test]
    fn json_shape() {
        let k = KernelSpec::Sum { children: vec![KernelSpec::Constant { value: 2.0 }, KernelSpec::rbf(1.5)] };
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(
            s,
            r#"{"kind":"sum","children":[{"kind":"constant","value":2.0},{"kind":"rbf","length_scale":1.5}]}"#
        );
        let back: KernelSpec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, k);
    }
}
