//! A/B/AB_i expansion of a 2d-column Sobol' block.

use serde::{Deserialize, Serialize};

use super::UnitPoint;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SaltelliOrder {
    /// `N·(d+2)` rows: A, B, AB_1..AB_d.
    #[default]
    First,
    /// `N·(2d+2)` rows: A, B, AB_1..AB_d, BA_1..BA_d.
    Second,
}

impl SaltelliOrder {
    pub fn rows_per_base(self, d: usize) -> usize {
        match self {
            SaltelliOrder::First => d + 2,
            SaltelliOrder::Second => 2 * d + 2,
        }
    }
}

/// Expands `base` (N rows of 2d columns) block-wise: all of A, then all of
/// B, then each AB_i (A with column i taken from B), then each BA_i for the
/// second-order layout.
pub fn saltelli_expand<T: Scalar>(
    base: &[UnitPoint<T>],
    d: usize,
    order: SaltelliOrder,
) -> Result<Vec<UnitPoint<T>>> {
    if d == 0 {
        return Err(Error::invalid("Saltelli dimension must be at least 1"));
    }
    if let Some(bad) = base.iter().find(|row| row.dim() != 2 * d) {
        return Err(Error::DimensionMismatch {
            expected: 2 * d,
            got: bad.dim(),
        });
    }
    let split = |row: &UnitPoint<T>| {
        let (a, b) = row.coords().split_at(d);
        (a.to_vec(), b.to_vec())
    };
    let pairs: Vec<(Vec<T>, Vec<T>)> = base.iter().map(split).collect();

    let mut out = Vec::with_capacity(base.len() * order.rows_per_base(d));
    out.extend(pairs.iter().map(|(a, _)| UnitPoint::new_unchecked(a.clone())));
    out.extend(pairs.iter().map(|(_, b)| UnitPoint::new_unchecked(b.clone())));
    for i in 0..d {
        out.extend(pairs.iter().map(|(a, b)| {
            let mut ab = a.clone();
            ab[i] = b[i];
            UnitPoint::new_unchecked(ab)
        }));
    }
    if order == SaltelliOrder::Second {
        for i in 0..d {
            out.extend(pairs.iter().map(|(a, b)| {
                let mut ba = b.clone();
                ba[i] = a[i];
                UnitPoint::new_unchecked(ba)
            }));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doe::sobol_sequence;

    fn pt(v: &[f64]) -> UnitPoint<f64> {
        UnitPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn single_row_expansion() {
        let base = [pt(&[0.1, 0.2, 0.3, 0.6, 0.7, 0.8])];
        let got: Vec<Vec<f64>> = saltelli_expand(&base, 3, SaltelliOrder::First)
            .unwrap()
            .into_iter()
            .map(|p| p.coords().to_vec())
            .collect();
        assert_eq!(
            got,
            vec![
                vec![0.1, 0.2, 0.3],
                vec![0.6, 0.7, 0.8],
                vec![0.6, 0.2, 0.3],
                vec![0.1, 0.7, 0.3],
                vec![0.1, 0.2, 0.8],
            ]
        );
    }

    #[test]
    fn block_sizes() {
        let base = sobol_sequence::<f64>(6, 32, 1).unwrap();
        assert_eq!(saltelli_expand(&base, 3, SaltelliOrder::First).unwrap().len(), 160);
        assert_eq!(saltelli_expand(&base, 3, SaltelliOrder::Second).unwrap().len(), 256);
    }

    #[test]
    fn wrong_column_count() {
        let base = sobol_sequence::<f64>(5, 4, 1).unwrap();
        assert!(matches!(
            saltelli_expand(&base, 3, SaltelliOrder::First),
            Err(Error::DimensionMismatch { expected: 6, got: 5 })
        ));
    }
}
