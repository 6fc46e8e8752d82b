//! Floating-point abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the numerical core is written against (`f32` or `f64`).
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Standard normal cumulative distribution function.
pub fn normal_cdf<T: Scalar>(z: T) -> T {
    T::lit(0.5 * statrs::function::erf::erfc(-z.as_f64() / std::f64::consts::SQRT_2))
}

/// Standard normal density.
pub fn normal_pdf<T: Scalar>(z: T) -> T {
    let two = T::lit(2.0);
    (-(z * z) / two).exp() / (two * T::PI()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_symmetry_and_center() {
        assert!((normal_cdf(0.0_f64) - 0.5).abs() < 1e-15);
        for z in [0.3, 1.0, 2.5] {
            assert!((normal_cdf(z) + normal_cdf(-z) - 1.0_f64).abs() < 1e-14);
        }
        assert!((normal_cdf(1.959963984540054_f64) - 0.975).abs() < 1e-11);
    }

    #[test]
    fn normal_pdf_peak() {
        assert!((normal_pdf(0.0_f64) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((normal_pdf(0.0_f32) - 0.398_942_3).abs() < 1e-6);
    }
}
