//! Dense lower-triangular factorization for symmetric positive-definite systems.
//!
//! The factor is stored row by row (row `i` holds `i + 1` entries) so that a
//! new observation can be appended without moving existing data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound = "T: Scalar")]
pub struct Cholesky<T> {
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn empty() -> Self {
        Cholesky { rows: Vec::new() }
    }

    /// Factorizes the symmetric matrix given by `entry(i, j)` for `j <= i`.
    pub fn factor<F: Fn(usize, usize) -> T>(n: usize, entry: F) -> Result<Self> {
        let mut chol = Cholesky::empty();
        let mut col = Vec::with_capacity(n);
        for i in 0..n {
            col.clear();
            col.extend((0..i).map(|j| entry(i, j)));
            chol.push(&col, entry(i, i))?;
        }
        Ok(chol)
    }

    /// Appends one row/column: `col[j]` is the off-diagonal entry against row `j`.
    pub fn push(&mut self, col: &[T], diag: T) -> Result<()> {
        let n = self.rows.len();
        if col.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: col.len() });
        }
        let mut row = col.to_vec();
        self.forward_in_place(&mut row);
        let sq: T = row.iter().map(|&v| v * v).sum();
        let d = diag - sq;
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::Factorization(format!(
                "matrix not positive definite at row {n} (pivot {d:e})"
            )));
        }
        row.push(d.sqrt());
        self.rows.push(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if j > i { T::zero() } else { self.rows[i][j] }
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    /// Solves `L x = b` over the leading `b.len()` rows, in place.
    pub fn forward_in_place(&self, b: &mut [T]) {
        for i in 0..b.len() {
            let row = &self.rows[i];
            let mut s = b[i];
            for j in 0..i {
                s -= row[j] * b[j];
            }
            b[i] = s / row[i];
        }
    }

    /// Extends a partial forward solve: `v` already solves the first
    /// `v.len()` rows of `L x = b`, and `b_tail` holds the remaining entries of `b`.
    pub fn extend_forward(&self, v: &mut Vec<T>, b_tail: &[T]) {
        let start = v.len();
        debug_assert_eq!(start + b_tail.len(), self.dim());
        for (k, &bk) in b_tail.iter().enumerate() {
            let i = start + k;
            let row = &self.rows[i];
            let mut s = bk;
            for j in 0..i {
                s -= row[j] * v[j];
            }
            v.push(s / row[i]);
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn backward_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.rows[j][i] * b[j];
            }
            b[i] = s / self.rows[i][i];
        }
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: b.len() });
        }
        let mut x = b.to_vec();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        Ok(x)
    }

    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        self.rows.iter().map(|r| two * r[r.len() - 1].ln()).sum()
    }

    /// `(L Lᵀ)[i][j]`, used to check the factorization.
    pub fn reconstruct(&self, i: usize, j: usize) -> T {
        let m = i.min(j);
        (0..=m).map(|k| self.rows[i][k] * self.rows[j][k]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd() -> [[f64; 3]; 3] {
        [[4.0, 12.0, -16.0], [12.0, 37.0, -43.0], [-16.0, -43.0, 98.0]]
    }

    #[test]
    fn classic_factor() {
        let a = spd();
        let c = Cholesky::factor(3, |i, j| a[i][j]).unwrap();
        let want = [[2.0, 0.0, 0.0], [6.0, 1.0, 0.0], [-8.0, 5.0, 3.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((c.get(i, j) - want[i][j]).abs() < 1e-12);
                assert!((c.reconstruct(i, j) - a[i][j]).abs() < 1e-12);
            }
        }
        assert!((c.log_det() - 36.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn solve_matches() {
        let a = spd();
        let c = Cholesky::factor(3, |i, j| a[i][j]).unwrap();
        let x = c.solve(&[1.0, 2.0, 3.0]).unwrap();
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i][j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-10);
        }
    }

    #[test]
    fn extend_forward_agrees_with_full_solve() {
        let a = spd();
        let c = Cholesky::factor(3, |i, j| a[i][j]).unwrap();
        let b = [1.0, -2.0, 0.5];
        let mut full = b;
        c.forward_in_place(&mut full);
        let mut v = vec![b[0]];
        c.forward_in_place(&mut v);
        c.extend_forward(&mut v, &b[1..]);
        assert_eq!(v, full.to_vec());
    }

    #[test]
    fn rejects_indefinite() {
        let err = Cholesky::factor(2, |i, j| if i == j { 1.0 } else { 2.0 }).unwrap_err();
        assert!(matches!(err, Error::Factorization(_)));
    }
}
