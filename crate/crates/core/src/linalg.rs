//! Dense row-major vectors and matrices for small state spaces.
//!
//! State dimensions in this project stay in the single digits, so all
//! operations are plain nested loops with deterministic accumulation
//! order; no BLAS, no blocking, no reordering. That keeps results
//! bit-identical across platforms and thread counts.

use crate::error::{Error, Result};

/// A real vector. Plain `Vec<f64>` keeps call sites simple and fast.
pub type Vector = Vec<f64>;

/// Dense row-major matrix.
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

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Matrix::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m.set(i, i, e);
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if `data` has the wrong length.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "matrix data length {} does not match {rows}x{cols}",
            data.len()
        );
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self * x` for a column vector `x`.
    pub fn matvec(&self, x: &[f64]) -> Vector {
        debug_assert_eq!(self.cols, x.len());
        let mut out = vec![0.0; self.rows];
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(row, x);
        }
        out
    }

    /// `self^T * x`; accumulates along rows so the access stays row-major.
    pub fn tr_matvec(&self, x: &[f64]) -> Vector {
        debug_assert_eq!(self.rows, x.len());
        let mut out = vec![0.0; self.cols];
        for (row, &xi) in self.data.chunks_exact(self.cols).zip(x.iter()) {
            for (o, &w) in out.iter_mut().zip(row.iter()) {
                *o += w * xi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let start = i * out.cols;
                for (j, &b) in orow.iter().enumerate() {
                    out.data[start + j] += a * b;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.at(r, c));
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        Matrix::from_vec(self.rows, self.cols, data)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        Matrix::from_vec(self.rows, self.cols, data)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix::from_vec(self.rows, self.cols, self.data.iter().map(|a| a * s).collect())
    }

    /// Largest absolute entry-wise difference; used as an iteration residual.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                if (self.at(r, c) - self.at(c, r)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Cholesky test for positive definiteness of a symmetric matrix:
    /// all pivots must exceed zero.
    pub fn is_positive_definite(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let n = self.rows;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.at(i, j);
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return false;
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        true
    }

    /// Solves `self * y = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vector> {
        let sol = self.solve_mat(&Matrix::from_vec(b.len(), 1, b.to_vec()))?;
        Ok(sol.data)
    }

    /// Solves `self * Y = B` for a matrix right-hand side.
    pub fn solve_mat(&self, b: &Matrix) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::Config(format!(
                "solve requires a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        if b.rows != self.rows {
            return Err(Error::Config(format!(
                "solve rhs has {} rows, expected {}",
                b.rows, self.rows
            )));
        }
        let n = self.rows;
        let m = b.cols;
        let mut a = self.data.clone();
        let mut rhs = b.data.clone();
        for col in 0..n {
            let mut pivot = col;
            let mut best = a[col * n + col].abs();
            for r in (col + 1)..n {
                let v = a[r * n + col].abs();
                if v > best {
                    best = v;
                    pivot = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Config(format!(
                    "singular matrix in solve (pivot column {col})"
                )));
            }
            if pivot != col {
                for c in 0..n {
                    a.swap(col * n + c, pivot * n + c);
                }
                for c in 0..m {
                    rhs.swap(col * m + c, pivot * m + c);
                }
            }
            let diag = a[col * n + col];
            for r in (col + 1)..n {
                let factor = a[r * n + col] / diag;
                if factor == 0.0 {
                    continue;
                }
                a[r * n + col] = 0.0;
                for c in (col + 1)..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
                for c in 0..m {
                    rhs[r * m + c] -= factor * rhs[col * m + c];
                }
            }
        }
        for col in (0..n).rev() {
            let diag = a[col * n + col];
            for c in 0..m {
                let mut sum = rhs[col * m + c];
                for k in (col + 1)..n {
                    sum -= a[col * n + k] * rhs[k * m + c];
                }
                rhs[col * m + c] = sum / diag;
            }
        }
        Ok(Matrix::from_vec(n, m, rhs))
    }
}

/// Inner product with left-to-right accumulation.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

/// Squared Euclidean norm.
#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Euclidean norm.
#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// The quadratic form `x^T Q x`, accumulated row by row.
///
/// Returns a configuration error when `Q` is not square of `x`'s dimension.
pub fn quad_form(q: &Matrix, x: &[f64]) -> Result<f64> {
    if q.rows() != q.cols() || q.rows() != x.len() {
        return Err(Error::Config(format!(
            "quad_form: Q is {}x{} but x has dimension {}",
            q.rows(),
            q.cols(),
            x.len()
        )));
    }
    Ok(quad_form_unchecked(q, x))
}

/// `x^T Q x` without the dimension check; callers validate dimensions once.
#[inline]
pub(crate) fn quad_form_unchecked(q: &Matrix, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (row, &xi) in q.data().chunks_exact(q.cols()).zip(x.iter()) {
        acc += xi * dot(row, x);
    }
    acc
}
