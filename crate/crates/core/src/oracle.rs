//! Brute-force verifiers: finite-difference gradients, golden-section line
//! search and from-scratch residual evaluation. None of these call the
//! closed-form solvers they are used to check.

use twofloat::TwoFloat;

use crate::citl::Penalties;
use crate::error::{Error, Result};
use crate::model::ShallowModel;
use crate::numcore::Matrix;

/// A deterministic map from a flat parameter vector to a scalar.
pub trait ObjectiveHandle {
    fn eval(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> ObjectiveHandle for F {
    fn eval(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Central-difference gradient with per-coordinate step `h·max(1, |xᵢ|)`.
pub fn finite_diff_grad<F: ObjectiveHandle + ?Sized>(f: &F, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be > 0, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let step = h * x[i].abs().max(1.0);
        probe[i] = x[i] + step;
        let up = f.eval(&probe);
        probe[i] = x[i] - step;
        let down = f.eval(&probe);
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        grad.push((up - down) / (2.0 * step));
    }
    Ok(grad)
}

/// Objective values golden-section search can compare.
pub trait ObjectiveValue: PartialOrd {
    fn is_finite_value(&self) -> bool;
}

impl ObjectiveValue for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl ObjectiveValue for TwoFloat {
    fn is_finite_value(&self) -> bool {
        self.is_valid()
    }
}

/// Golden-section search for the minimizer of a unimodal `f` on `[lo, hi]`.
/// Stops once the bracket is no wider than `tol` and returns its midpoint.
///
/// With `f64` values the argmin is resolved only to about `√ε·|x*|`; return
/// [`TwoFloat`] values to go below that.
pub fn minimize_1d<V: ObjectiveValue, F: Fn(f64) -> V>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidBracket(lo, hi));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be > 0, got {tol}")));
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if !fc.is_finite_value() || !fd.is_finite_value() {
            return Err(Error::NonFiniteObjective);
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        // guard against a stalled bracket at the floating-point floor
        if c <= a || d >= b || c >= d {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Explicit target-domain data blocks: inputs, labels, pseudo-labels and
/// the graph Laplacian over labeled-then-unlabeled rows.
#[derive(Debug, Clone)]
pub struct TargetBlocks {
    pub x_tl: Matrix,
    pub t_tl: Matrix,
    pub x_tu: Matrix,
    pub t_tu: Matrix,
    pub lap: Matrix,
}

impl TargetBlocks {
    fn x_t(&self) -> Result<Matrix> {
        let mut x = self.x_tl.clone();
        for i in 0..self.x_tu.rows() {
            x.push_row(self.x_tu.row(i))?;
        }
        Ok(x)
    }
}

fn lap_times_row(lap: &Matrix, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|j| (0..n).map(|i| lap[(j, i)] * v[i]).sum())
        .collect()
}

/// `(e_Tl, e_Tu, ζ)` evaluated from scratch: residuals are labels minus the
/// model's predictions and `ζ_q = Lap·ŷ_q` over all target rows.
pub fn recompute_residuals(model: &ShallowModel, blocks: &TargetBlocks) -> Result<(Matrix, Matrix, Matrix)> {
    let m = model.m;
    let (n_tl, n_tu) = (blocks.x_tl.rows(), blocks.x_tu.rows());
    if blocks.t_tl.shape() != (n_tl, m) || (n_tu > 0 && blocks.t_tu.shape() != (n_tu, m)) {
        return Err(Error::DimensionMismatch("target blocks do not match the model outputs".into()));
    }
    if blocks.lap.shape() != (n_tl + n_tu, n_tl + n_tu) {
        return Err(Error::DimensionMismatch("Laplacian does not match the target blocks".into()));
    }
    let x_t = blocks.x_t()?;
    let pred = model.predict(&x_t)?;
    let mut e_tl = Matrix::zeros(m, n_tl);
    let mut e_tu = Matrix::zeros(m, n_tu);
    let mut zeta = Matrix::zeros(m, n_tl + n_tu);
    for q in 0..m {
        for i in 0..n_tl {
            e_tl[(q, i)] = blocks.t_tl[(i, q)] - pred[(i, q)];
        }
        for i in 0..n_tu {
            e_tu[(q, i)] = blocks.t_tu[(i, q)] - pred[(n_tl + i, q)];
        }
        let z = lap_times_row(&blocks.lap, &pred.column(q));
        zeta.row_mut(q).copy_from_slice(&z);
    }
    Ok((e_tl, e_tu, zeta))
}

/// The full target objective over output weights, assembled from explicit
/// hidden-output blocks:
/// `½‖β‖² + C_T/2‖T_Tl − H_Tlᵀβ‖² + C_Tu/2‖T_Tu − H_Tuᵀβ‖² + η/2·tr((H_Tᵀβ)ᵀ·Lap·H_Tᵀβ)`.
#[derive(Debug, Clone)]
pub struct CitlObjective {
    pub h_tl: Matrix,
    pub h_tu: Matrix,
    pub h_t: Matrix,
    pub t_tl: Matrix,
    pub t_tu: Matrix,
    pub lap: Matrix,
    pub pen: Penalties,
}

impl CitlObjective {
    pub fn nodes(&self) -> usize {
        self.h_tl.rows()
    }

    pub fn outputs(&self) -> usize {
        self.t_tl.cols()
    }

    /// Network outputs `Σ_l β_lq·h_l(i)` for every column of `h`.
    fn outputs_of(h: &Matrix, beta: &[f64], m: usize, q: usize) -> Vec<f64> {
        (0..h.cols())
            .map(|i| (0..h.rows()).map(|l| beta[l * m + q] * h[(l, i)]).sum())
            .collect()
    }

    /// Objective at a row-major `L×m` weight vector.
    pub fn value(&self, beta: &[f64]) -> f64 {
        let m = self.outputs();
        let mut j = 0.5 * beta.iter().map(|b| b * b).sum::<f64>();
        for q in 0..m {
            let yl = Self::outputs_of(&self.h_tl, beta, m, q);
            let fit: f64 = yl.iter().enumerate().map(|(i, y)| (self.t_tl[(i, q)] - y).powi(2)).sum();
            j += 0.5 * self.pen.c_t * fit;
            if self.h_tu.cols() > 0 {
                let yu = Self::outputs_of(&self.h_tu, beta, m, q);
                let fit: f64 = yu.iter().enumerate().map(|(i, y)| (self.t_tu[(i, q)] - y).powi(2)).sum();
                j += 0.5 * self.pen.c_tu * fit;
            }
            let yt = Self::outputs_of(&self.h_t, beta, m, q);
            let ly = lap_times_row(&self.lap, &yt);
            j += 0.5 * self.pen.eta * yt.iter().zip(&ly).map(|(a, b)| a * b).sum::<f64>();
        }
        j
    }
}

impl ObjectiveHandle for CitlObjective {
    fn eval(&self, x: &[f64]) -> f64 {
        self.value(x)
    }
}

/// The objective restricted to the weight `b` of one new node for output
/// `q`, with every earlier weight fixed, reported relative to `b = 0` so that
/// no large constant swamps the curvature.
#[derive(Debug, Clone)]
pub struct NodeObjective {
    /// Labeled residual of output `q` before the node is added.
    pub e_tl: Vec<f64>,
    pub e_tu: Vec<f64>,
    /// Current predictions of output `q` on all target rows.
    pub pred_t: Vec<f64>,
    pub h_tl: Vec<f64>,
    pub h_tu: Vec<f64>,
    pub h_t: Vec<f64>,
    pub lap: Matrix,
    pub pen: Penalties,
}

impl NodeObjective {
    pub fn value(&self, b: f64) -> f64 {
        // (r − b·h)² − r² = −b·h·(2r − b·h)
        let fit = |e: &[f64], h: &[f64]| -> f64 { e.iter().zip(h).map(|(r, h)| -b * h * (2.0 * r - b * h)).sum() };
        // (p + b·h)ᵀL(p + b·h) − pᵀLp = b·hᵀL(2p + b·h)
        let shifted: Vec<f64> = self.pred_t.iter().zip(&self.h_t).map(|(p, h)| 2.0 * p + b * h).collect();
        let l_shifted = lap_times_row(&self.lap, &shifted);
        let manifold: f64 = b * self.h_t.iter().zip(&l_shifted).map(|(h, v)| h * v).sum::<f64>();
        0.5 * b * b
            + 0.5 * self.pen.c_t * fit(&self.e_tl, &self.h_tl)
            + 0.5 * self.pen.c_tu * fit(&self.e_tu, &self.h_tu)
            + 0.5 * self.pen.eta * manifold
    }

    /// [`Self::value`] in double-double arithmetic.
    pub fn value_extended(&self, b: f64) -> TwoFloat {
        let zero = TwoFloat::from(0.0);
        let fit = |e: &[f64], h: &[f64]| -> TwoFloat {
            e.iter().zip(h).fold(zero, |acc, (&r, &h)| {
                let bh = TwoFloat::new_mul(b, h);
                acc - bh * (TwoFloat::from(2.0 * r) - bh)
            })
        };
        let shifted: Vec<TwoFloat> = self
            .pred_t
            .iter()
            .zip(&self.h_t)
            .map(|(&p, &h)| TwoFloat::from(2.0 * p) + TwoFloat::new_mul(b, h))
            .collect();
        let n = shifted.len();
        let mut manifold = zero;
        for j in 0..n {
            let lj = (0..n).fold(zero, |acc, i| acc + shifted[i] * self.lap[(j, i)]);
            manifold += lj * self.h_t[j];
        }
        TwoFloat::new_mul(b, b) * 0.5
            + fit(&self.e_tl, &self.h_tl) * (0.5 * self.pen.c_t)
            + fit(&self.e_tu, &self.h_tu) * (0.5 * self.pen.c_tu)
            + manifold * b * (0.5 * self.pen.eta)
    }
}
