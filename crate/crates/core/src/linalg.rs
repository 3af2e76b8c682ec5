//! General dense matrices and the few factorizations the identity checks
//! need: singular values by one-sided Jacobi, and column-to-span distances by
//! Householder QR.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::math;

/// Row-major `rows x cols` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    /// Matrix with i.i.d. standard normal entries.
    pub fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    math::sqrt(x.iter().map(|v| v * v).sum())
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Singular values (descending) by one-sided Jacobi rotations on the
/// columns. Accurate in the relative sense for small singular values, unlike
/// eigenvalues of `MᵀM`.
pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    // Work column-major on a copy with at least as many rows as columns.
    let src = if m.rows >= m.cols { m.clone() } else { m.transpose() };
    let (rows, cols) = (src.rows, src.cols);
    let mut u: Vec<Vec<f64>> = (0..cols).map(|j| src.column(j)).collect();
    let tol = 1e-15;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = dot(&u[p], &u[p]);
                let beta = dot(&u[q], &u[q]);
                let gamma = dot(&u[p], &u[q]);
                if gamma == 0.0 || math::abs(gamma) <= tol * math::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (math::abs(zeta) + math::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = c * t;
                let (left, right) = u.split_at_mut(q);
                let (up, uq) = (&mut left[p], &mut right[0]);
                for i in 0..rows {
                    let a = up[i];
                    let b = uq[i];
                    up[i] = c * a - s * b;
                    uq[i] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = u.iter().map(|c| norm2(c)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn sigma_min(m: &DenseMatrix) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

pub fn sigma_max(m: &DenseMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Distance of column `j` of `m` to the span of the other columns, by
/// Householder QR of the remaining columns and projection of column `j` onto
/// the orthogonal complement.
pub fn column_distance_to_span(m: &DenseMatrix, j: usize) -> f64 {
    let rows = m.rows;
    let others: Vec<Vec<f64>> = (0..m.cols).filter(|&c| c != j).map(|c| m.column(c)).collect();
    let mut target = m.column(j);
    let mut basis = others;
    let k = basis.len().min(rows);
    // Householder vectors applied successively to the basis columns and target.
    for step in 0..k {
        let x = &basis[step];
        let alpha = norm2(&x[step..]);
        if alpha == 0.0 {
            continue;
        }
        let sign = if x[step] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = vec![0.0; rows];
        v[step..].copy_from_slice(&x[step..]);
        v[step] += sign * alpha;
        let vv = dot(&v[step..], &v[step..]);
        if vv == 0.0 {
            continue;
        }
        let reflect = |col: &mut [f64]| {
            let f = 2.0 * dot(&v[step..], &col[step..]) / vv;
            for i in step..rows {
                col[i] -= f * v[i];
            }
        };
        for col in basis.iter_mut().skip(step) {
            reflect(col);
        }
        reflect(&mut target);
    }
    // Components beyond the first k coordinates are orthogonal to the span
    // (assuming the other columns have full rank).
    norm2(&target[k..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_values_of_known_matrices() {
        let m = DenseMatrix::from_rows(2, 2, vec![3.0, 0.0, 0.0, -2.0]);
        assert_eq!(singular_values(&m), vec![3.0, 2.0]);
        // [[1,1],[0,1]] has singular values (√5 ± 1)/2
        let m = DenseMatrix::from_rows(2, 2, vec![1.0, 1.0, 0.0, 1.0]);
        let sv = singular_values(&m);
        let r5 = 5f64.sqrt();
        assert!((sv[0] - (r5 + 1.0) / 2.0).abs() < 1e-14);
        assert!((sv[1] - (r5 - 1.0) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn column_distance_basic() {
        let m = DenseMatrix::from_rows(2, 2, vec![2.0, 0.0, 0.0, 3.0]);
        assert!((column_distance_to_span(&m, 0) - 2.0).abs() < 1e-15);
        let m = DenseMatrix::from_rows(2, 2, vec![1.0, 1.0, 1.0, 0.0]);
        // column 0 = (1,1), span{(1,0)} → distance 1
        assert!((column_distance_to_span(&m, 0) - 1.0).abs() < 1e-15);
    }
}
