//! Dense column-major matrix kernel plus the normal-equations least-squares
//! solver used as an independent recovery oracle.
//!
//! Samples are columns everywhere in this crate, so column-major storage
//! keeps each sample contiguous. All reductions run in a fixed order:
//! identical inputs give bit-identical outputs.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;

/// Pivot threshold on B·Bᵀ below which a row of B is declared linearly
/// dependent on earlier rows.
pub const OLS_PIVOT_THRESHOLD: f64 = 1e-10;

/// Dense `f64` matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Wraps a column-major buffer; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, Error> {
        if data.len() != rows * cols {
            return Err(Error::DataLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[c * self.rows + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[c * self.rows + r] = v;
    }

    /// Contiguous view of column `c`.
    pub fn column(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn column_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// New matrix made of the selected columns, in the given order.
    pub fn gather_columns(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * indices.len());
        for &c in indices {
            data.extend_from_slice(self.column(c));
        }
        Matrix {
            rows: self.rows,
            cols: indices.len(),
            data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    /// Element-wise `self - other`.
    pub fn sub(&self, other: &Matrix) -> Result<Matrix, Error> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op: "sub",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Element-wise product.
    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix, Error> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op: "hadamard",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Standard matrix product. The inner reduction runs over ascending
    /// inner index for every output entry.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, Error> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let m = self.rows;
        let inner = self.cols;
        let n = other.cols;
        let mut out = vec![0.0; m * n];
        for j in 0..n {
            let out_col = &mut out[j * m..(j + 1) * m];
            for l in 0..inner {
                let b_lj = other.data[j * inner + l];
                let a_col = &self.data[l * m..(l + 1) * m];
                for i in 0..m {
                    out_col[i] += a_col[i] * b_lj;
                }
            }
        }
        Ok(Matrix {
            rows: m,
            cols: n,
            data: out,
        })
    }

    /// Sum of squared entries.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.frobenius_sq())
    }
}

/// Euclidean norm of a slice.
pub fn vec_norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Lower-triangular Cholesky factor of a symmetric matrix, tolerant of
/// semidefiniteness: pivots at or below `threshold` are recorded in the
/// returned index list and their column of L is left zero.
fn cholesky_semidefinite(g: &Matrix, threshold: f64) -> (Matrix, Vec<usize>) {
    let k = g.rows();
    let mut l = Matrix::zeros(k, k);
    let mut dependent = Vec::new();
    for j in 0..k {
        let mut pivot = g.get(j, j);
        for p in 0..j {
            let v = l.get(j, p);
            pivot -= v * v;
        }
        // NaN pivots count as dependent as well
        if pivot.is_nan() || pivot <= threshold {
            dependent.push(j);
            continue;
        }
        let diag = libm::sqrt(pivot);
        l.set(j, j, diag);
        for i in (j + 1)..k {
            let mut v = g.get(i, j);
            for p in 0..j {
                v -= l.get(i, p) * l.get(j, p);
            }
            l.set(i, j, v / diag);
        }
    }
    (l, dependent)
}

/// Rows of `b` that are linear combinations of earlier rows, detected by
/// pivoting on B·Bᵀ at [`OLS_PIVOT_THRESHOLD`].
pub fn dependent_rows(b: &Matrix) -> Result<Vec<usize>, Error> {
    let g = b.matmul(&b.transpose())?;
    Ok(cholesky_semidefinite(&g, OLS_PIVOT_THRESHOLD).1)
}

/// Least-squares solve: returns the `U` minimizing ‖X − U·B‖_F via the
/// normal equations U = X·Bᵀ·(B·Bᵀ)⁻¹ with a Cholesky factorization.
///
/// `b` must have full row rank; dependent rows are reported otherwise.
#[allow(clippy::needless_range_loop)] // triangular solves read naturally as index loops
pub fn solve_ols(x: &Matrix, b: &Matrix) -> Result<Matrix, Error> {
    if x.cols() != b.cols() {
        return Err(Error::ShapeMismatch {
            op: "solve_ols",
            left: x.shape(),
            right: b.shape(),
        });
    }
    let bt = b.transpose();
    let g = b.matmul(&bt)?;
    let (l, dependent) = cholesky_semidefinite(&g, OLS_PIVOT_THRESHOLD);
    if !dependent.is_empty() {
        return Err(Error::RankDeficient {
            dependent_rows: dependent,
        });
    }
    let c = x.matmul(&bt)?; // N×K right-hand sides, one per row
    let k = b.rows();
    let n = x.rows();
    let mut u = Matrix::zeros(n, k);
    let mut rhs = vec![0.0; k];
    for q in 0..n {
        for i in 0..k {
            rhs[i] = c.get(q, i);
        }
        // forward: L y = rhs
        for i in 0..k {
            let mut v = rhs[i];
            for p in 0..i {
                v -= l.get(i, p) * rhs[p];
            }
            rhs[i] = v / l.get(i, i);
        }
        // back: Lᵀ u = y
        for i in (0..k).rev() {
            let mut v = rhs[i];
            for p in (i + 1)..k {
                v -= l.get(p, i) * rhs[p];
            }
            rhs[i] = v / l.get(i, i);
        }
        for i in 0..k {
            u.set(q, i, rhs[i]);
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let a = Matrix::from_fn(3, 4, |r, c| (r * 4 + c) as f64);
        let i3 = Matrix::identity(3);
        let i4 = Matrix::identity(4);
        assert_eq!(i3.matmul(&a).unwrap(), a);
        assert_eq!(a.matmul(&i4).unwrap(), a);
    }

    #[test]
    fn matmul_hand_checked() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 3.0, 2.0, 4.0]).unwrap(); // [[1,2],[3,4]]
        let b = Matrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        let err = a.matmul(&b).unwrap_err();
        assert_eq!(
            err,
            Error::ShapeMismatch {
                op: "matmul",
                left: (2, 3),
                right: (4, 2)
            }
        );
    }

    #[test]
    fn frobenius_trivials() {
        assert_eq!(Matrix::zeros(3, 5).frobenius_sq(), 0.0);
        let m = Matrix::from_vec(1, 2, vec![3.0, 4.0]).unwrap();
        assert_eq!(m.frobenius_sq(), 25.0);
    }

    #[test]
    fn ols_identity_design_returns_x() {
        let x = Matrix::from_fn(4, 3, |r, c| (r + 10 * c) as f64);
        let b = Matrix::identity(3);
        let u = solve_ols(&x, &b).unwrap();
        for r in 0..4 {
            for c in 0..3 {
                assert!((u.get(r, c) - x.get(r, c)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ols_rank_deficiency_lists_dependent_rows() {
        // row 2 = row 0 + row 1
        let mut b = Matrix::zeros(3, 4);
        for c in 0..4 {
            b.set(0, c, (c + 1) as f64);
            b.set(1, c, (2 * c) as f64);
            b.set(2, c, (c + 1) as f64 + (2 * c) as f64);
        }
        let x = Matrix::zeros(2, 4);
        match solve_ols(&x, &b) {
            Err(Error::RankDeficient { dependent_rows }) => {
                assert_eq!(dependent_rows, vec![2]);
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn gather_columns_preserves_order() {
        let m = Matrix::from_fn(2, 4, |r, c| (10 * c + r) as f64);
        let g = m.gather_columns(&[3, 1]);
        assert_eq!(g.data(), &[30.0, 31.0, 10.0, 11.0]);
    }
}
