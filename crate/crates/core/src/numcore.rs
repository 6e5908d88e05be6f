//! Dense numeric kernels and the seedable random stream.
//!
//! [`Matrix`] is a small row-major dense matrix. It only carries the
//! operations the growth algorithms need; anything heavier (Cholesky,
//! eigenvalues in tests) goes through `nalgebra`.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
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
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows. An empty slice gives a 0×0 matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn column_vector(v: &[f64]) -> Self {
        Matrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Appends a row. A 0×0 matrix adopts the row's length.
    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if self.rows == 0 && self.data.is_empty() {
            self.cols = row.len();
        }
        if row.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "pushed row has {} entries, matrix has {} columns",
                row.len(),
                self.cols
            )));
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, idx: impl IntoIterator<Item = usize>) -> Matrix {
        let mut out = Matrix::zeros(0, self.cols);
        for i in idx {
            out.data.extend_from_slice(self.row(i));
            out.rows += 1;
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · rhsᵀ` without materializing the transpose.
    pub fn matmul_t(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.cols {
            return Err(Error::DimensionMismatch(format!(
                "matmul_t {}x{} by ({}x{})ᵀ",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            for j in 0..rhs.rows {
                out[(i, j)] = dot(self.row(i), rhs.row(j));
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch(format!(
                "elementwise op on {:?} and {:?}",
                self.shape(),
                rhs.shape()
            )));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_scaled_in_place(&mut self, rhs: &Matrix, s: f64) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch(format!(
                "axpy on {:?} and {:?}",
                self.shape(),
                rhs.shape()
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Largest |Aᵢⱼ − Aⱼᵢ| relative to max(1, max|A|).
    pub fn asymmetry(&self) -> f64 {
        let scale = self.max_abs().max(1.0);
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        let (rows, cols) = m.shape();
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] = m[(i, j)];
            }
        }
        out
    }

    /// Smallest eigenvalue of a symmetric matrix.
    pub fn min_symmetric_eigenvalue(&self) -> Result<f64> {
        if !self.is_square() || self.rows == 0 {
            return Err(Error::DimensionMismatch("eigenvalues need a non-empty square matrix".into()));
        }
        let eig = self.to_nalgebra().symmetric_eigen();
        Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Solves `A·X = B` for symmetric positive-definite `A`.
///
/// On a failed Cholesky factorization the solve is retried once with
/// `A + (1e-10·tr(A)/n)·I`.
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if n == 0 || !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "solve_spd needs a non-empty square matrix, got {:?}",
            a.shape()
        )));
    }
    if b.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "rhs has {} rows, system has {n}",
            b.rows()
        )));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("solve_spd input"));
    }
    let asym = a.asymmetry();
    if asym > 1e-9 {
        return Err(Error::NotSymmetric(asym));
    }
    let a_na = a.to_nalgebra();
    let b_na = b.to_nalgebra();
    let chol = match a_na.clone().cholesky() {
        Some(c) => c,
        None => {
            let jitter = 1e-10 * a.trace() / n as f64;
            log::warn!("cholesky failed, retrying with jitter {jitter:e}");
            let shifted = a_na + DMatrix::<f64>::identity(n, n) * jitter;
            shifted.cholesky().ok_or(Error::FactorizationFailed)?
        }
    };
    let x = chol.solve(&b_na);
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::FactorizationFailed);
    }
    Ok(Matrix::from_nalgebra(&x))
}

/// `hᵀ M h`, evaluated as a plain bilinear sum.
pub fn quad_form(h: &[f64], m: &Matrix) -> Result<f64> {
    if !m.is_square() || m.rows() != h.len() {
        return Err(Error::DimensionMismatch(format!(
            "quad_form with vector of length {} and {:?} matrix",
            h.len(),
            m.shape()
        )));
    }
    Ok((0..h.len()).map(|i| h[i] * dot(m.row(i), h)).sum())
}

/// Deterministic random stream backed by ChaCha8.
///
/// Uniform reals take the top 53 bits of each `u64` draw, normals use the
/// Box-Muller transform on two uniforms. Both conversions are written out
/// here so the value sequence only depends on the ChaCha8 keystream, which
/// is platform independent.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent substream keyed by `(seed, index)`.
    pub fn fork(&self, index: u64) -> RngStream {
        RngStream::new(derive_seed(self.seed, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi].
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        // 1 - u keeps the log argument in (0, 1]
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }
}

/// SplitMix64 finalizer over `seed ⊕ golden·(index+1)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
