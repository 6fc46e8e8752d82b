//! Unscrambled Sobol' sequence in Gray-code order.
//!
//! Point 0 is the origin; callers that need an interior first point pass
//! `skip = 1`. Direction numbers are the Joe–Kuo `new-joe-kuo-6.21201` set,
//! so output matches other unscrambled implementations point for point.

use super::UnitPoint;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_DIMENSION: usize = 16;
const BITS: usize = 32;

/// `(degree s, coefficients a, initial m_1..m_s)` for dimensions 2..=16.
const JOE_KUO: [(usize, u32, &[u32]); MAX_DIMENSION - 1] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
];

fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        // van der Corput
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (BITS - 1 - k);
        }
        return v;
    }
    let (s, a, m) = JOE_KUO[dim - 1];
    for k in 0..s {
        v[k] = m[k] << (BITS - 1 - k);
    }
    for k in s..BITS {
        let mut x = v[k - s] ^ (v[k - s] >> s);
        for j in 1..s {
            if (a >> (s - 1 - j)) & 1 == 1 {
                x ^= v[k - j];
            }
        }
        v[k] = x;
    }
    v
}

/// Integer state of the `index`-th Gray-code point in one dimension.
fn state_at(v: &[u32; BITS], index: u64) -> u32 {
    let gray = index ^ (index >> 1);
    (0..BITS)
        .filter(|&k| (gray >> k) & 1 == 1)
        .fold(0u32, |x, k| x ^ v[k])
}

/// First `n` points after skipping `skip` in dimension `d`.
pub fn sobol_sequence<T: Scalar>(d: usize, n: usize, skip: u64) -> Result<Vec<UnitPoint<T>>> {
    if d == 0 {
        return Err(Error::invalid("Sobol dimension must be at least 1"));
    }
    if d > MAX_DIMENSION {
        return Err(Error::UnsupportedDimension(d));
    }
    let end = skip
        .checked_add(n as u64)
        .filter(|&e| e <= 1u64 << BITS)
        .ok_or_else(|| Error::invalid("Sobol index range exceeds 2^32"))?;
    let dirs: Vec<[u32; BITS]> = (0..d).map(direction_numbers).collect();
    let mut state: Vec<u32> = dirs.iter().map(|v| state_at(v, skip)).collect();
    let scale = T::lit(1.0 / (1u64 << BITS) as f64);

    let mut out = Vec::with_capacity(n);
    for index in skip..end {
        out.push(UnitPoint::new_unchecked(
            state.iter().map(|&x| T::from_u32(x).unwrap() * scale).collect(),
        ));
        // Next Gray-code point flips the direction number at the lowest zero bit.
        let c = index.trailing_ones() as usize;
        if c < BITS {
            for (x, v) in state.iter_mut().zip(&dirs) {
                *x ^= v[c];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(points: &[UnitPoint<f64>]) -> Vec<Vec<f64>> {
        points.iter().map(|p| p.coords().to_vec()).collect()
    }

    #[test]
    fn first_element_is_origin() {
        assert_eq!(rows(&sobol_sequence(1, 1, 0).unwrap()), vec![vec![0.0]]);
        assert_eq!(rows(&sobol_sequence(1, 1, 1).unwrap()), vec![vec![0.5]]);
    }

    #[test]
    fn skip_matches_tail_of_longer_run() {
        let full = rows(&sobol_sequence::<f64>(5, 40, 0).unwrap());
        let tail = rows(&sobol_sequence::<f64>(5, 27, 13).unwrap());
        assert_eq!(&full[13..], &tail[..]);
    }

    #[test]
    fn dimension_limits() {
        assert!(matches!(
            sobol_sequence::<f64>(17, 4, 0),
            Err(Error::UnsupportedDimension(17))
        ));
        assert!(sobol_sequence::<f64>(0, 4, 0).is_err());
        assert_eq!(sobol_sequence::<f64>(16, 3, 0).unwrap().len(), 3);
    }

    #[test]
    fn one_dimensional_is_van_der_corput() {
        let got = rows(&sobol_sequence(1, 8, 0).unwrap());
        let want = [0.0, 0.5, 0.75, 0.25, 0.375, 0.875, 0.625, 0.125];
        for (g, w) in got.iter().zip(want) {
            assert_eq!(g[0], w);
        }
    }
}
