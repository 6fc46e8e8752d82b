use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;

use super::UnitPoint;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Latin hypercube of `n` points in `[0,1]^d`: each axis is cut into `n`
/// equal strata and every stratum holds exactly one point, jittered
/// uniformly inside it.
pub fn latin_hypercube<T: Scalar>(n: usize, d: usize, seed: u64) -> Result<Vec<UnitPoint<T>>> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("latin hypercube needs n >= 1 and d >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = n as f64;
    let mut columns = Vec::with_capacity(d);
    for _ in 0..d {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        let column: Vec<f64> = strata
            .into_iter()
            .map(|s| {
                let u: f64 = rng.sample(Open01);
                (s as f64 + u) / nf
            })
            .collect();
        columns.push(column);
    }
    Ok((0..n)
        .map(|i| UnitPoint::new_unchecked(columns.iter().map(|c| T::lit(c[i])).collect()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_interior() {
        let p = latin_hypercube::<f64>(1, 3, 99).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p[0].coords().iter().all(|&u| u > 0.0 && u < 1.0));
    }

    #[test]
    fn seeded_determinism() {
        let a = latin_hypercube::<f64>(10, 3, 7).unwrap();
        let b = latin_hypercube::<f64>(10, 3, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, latin_hypercube::<f64>(10, 3, 8).unwrap());
    }

    #[test]
    fn rejects_empty() {
        assert!(latin_hypercube::<f64>(0, 3, 1).is_err());
    }
}
