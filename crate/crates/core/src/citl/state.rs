//! Target growth state and the closed forms evaluated against it.
//!
//! Column order everywhere is labeled block first, then unlabeled block;
//! the Laplacian is built over the same ordering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{node_output, Activation};
use crate::numcore::{dot, norm_sq, quad_form, solve_spd, Matrix};

/// Weights of the three objective terms: labeled fit, agreement with
/// source pseudo-labels, and manifold smoothness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalties {
    pub c_t: f64,
    pub c_tu: f64,
    pub eta: f64,
}

/// Hidden outputs of one candidate node on every target block.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeOutputs {
    pub h_tl: Vec<f64>,
    pub h_tu: Vec<f64>,
    pub h_t: Vec<f64>,
}

impl NodeOutputs {
    pub fn new(h_tl: Vec<f64>, h_tu: Vec<f64>) -> Self {
        let h_t = h_tl.iter().chain(&h_tu).copied().collect();
        NodeOutputs { h_tl, h_tu, h_t }
    }

    pub fn compute(omega: &[f64], bias: f64, act: Activation, x_tl: &Matrix, x_tu: &Matrix) -> Self {
        Self::new(node_output(omega, bias, act, x_tl), node_output(omega, bias, act, x_tu))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthState {
    pub h_tl: Matrix,
    pub h_tu: Matrix,
    pub h_t: Matrix,
    /// m×N_Tl, `T_Tlᵀ − βᵀH_Tl`.
    pub e_tl: Matrix,
    /// m×N_Tu, `T_Tuᵀ − βᵀH_Tu`.
    pub e_tu: Matrix,
    /// m×N_T, row q is `Lap·H_Tᵀ·β_q`.
    pub zeta: Matrix,
    pub lap: Matrix,
    pub t_tl: Matrix,
    /// Source-model pseudo-labels on the unlabeled block, N_Tu×m.
    pub t_tu: Matrix,
    pub beta: Matrix,
}

/// The starred terms of the node inequality for one output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeTerms {
    pub a: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub g: f64,
}

impl NodeTerms {
    pub fn numerator(&self) -> f64 {
        self.a + self.c - self.d - self.e - self.f - self.g
    }
}

/// Per-output terms plus the shared denominator `b_g`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeAnalysis {
    pub terms: Vec<NodeTerms>,
    /// `h' = 1/C_T + (C_Tu/C_T)‖h_Tu‖² + (η/C_T)·h_Tᵀ·Lap·h_T`
    pub h_prime: f64,
    /// `b_g = h' + ‖h_Tl‖²`
    pub b_g: f64,
    /// `⟨e_Tl,q, h_Tl⟩`, `⟨e_Tu,q, h_Tu⟩`, `⟨ζ_q, h_T⟩` per output.
    pub eh: Vec<f64>,
    pub euh: Vec<f64>,
    pub zh: Vec<f64>,
}

impl NodeAnalysis {
    /// Labeled residual drop `(A + C − D − E − F − G)/b_g²` per output.
    pub fn gains(&self) -> Vec<f64> {
        let bg2 = self.b_g * self.b_g;
        self.terms.iter().map(|t| t.numerator() / bg2).collect()
    }

    /// Closed-form output weight of the node with all other weights fixed.
    pub fn weights(&self, pen: &Penalties) -> Vec<f64> {
        (0..self.eh.len())
            .map(|q| {
                (self.eh[q] + pen.c_tu / pen.c_t * self.euh[q] - pen.eta / pen.c_t * self.zh[q]) / self.b_g
            })
            .collect()
    }
}

impl GrowthState {
    /// Zero-node state: residuals equal the targets, ζ is zero.
    pub fn new(t_tl: Matrix, t_tu: Matrix, lap: Matrix) -> Result<Self> {
        let (n_tl, m) = t_tl.shape();
        let n_tu = t_tu.rows();
        if t_tu.rows() > 0 && t_tu.cols() != m {
            return Err(Error::DimensionMismatch(format!(
                "labeled targets have {m} outputs, pseudo-labels {}",
                t_tu.cols()
            )));
        }
        if lap.shape() != (n_tl + n_tu, n_tl + n_tu) {
            return Err(Error::DimensionMismatch(format!(
                "Laplacian {:?} for {} target samples",
                lap.shape(),
                n_tl + n_tu
            )));
        }
        let t_tu = if n_tu == 0 { Matrix::zeros(0, m) } else { t_tu };
        Ok(GrowthState {
            h_tl: Matrix::zeros(0, n_tl),
            h_tu: Matrix::zeros(0, n_tu),
            h_t: Matrix::zeros(0, n_tl + n_tu),
            e_tl: t_tl.transpose(),
            e_tu: if n_tu == 0 { Matrix::zeros(m, 0) } else { t_tu.transpose() },
            zeta: Matrix::zeros(m, n_tl + n_tu),
            lap,
            t_tl,
            t_tu,
            beta: Matrix::zeros(0, m),
        })
    }

    pub fn node_count(&self) -> usize {
        self.h_tl.rows()
    }

    pub fn outputs(&self) -> usize {
        self.t_tl.cols()
    }

    pub fn n_tl(&self) -> usize {
        self.t_tl.rows()
    }

    pub fn n_tu(&self) -> usize {
        self.t_tu.rows()
    }

    pub fn residual_fro(&self) -> f64 {
        self.e_tl.frobenius_norm()
    }

    fn check_node(&self, h_tl: &[f64], h_tu: &[f64], h_t: &[f64]) -> Result<()> {
        let (n_tl, n_tu) = (self.n_tl(), self.n_tu());
        if h_tl.len() != n_tl || h_tu.len() != n_tu || h_t.len() != n_tl + n_tu {
            return Err(Error::InconsistentState(format!(
                "node outputs of length {}/{}/{} for blocks {n_tl}/{n_tu}",
                h_tl.len(),
                h_tu.len(),
                h_t.len()
            )));
        }
        let m = self.outputs();
        if self.e_tl.shape() != (m, n_tl)
            || self.e_tu.shape() != (m, n_tu)
            || self.zeta.shape() != (m, n_tl + n_tu)
        {
            return Err(Error::InconsistentState("residual shapes".into()));
        }
        Ok(())
    }

    /// Evaluates every term of the node inequality for a candidate.
    pub fn analyze(&self, h_tl: &[f64], h_tu: &[f64], h_t: &[f64], pen: &Penalties) -> Result<NodeAnalysis> {
        self.check_node(h_tl, h_tu, h_t)?;
        let s = norm_sq(h_tl);
        let hu2 = norm_sq(h_tu);
        let hlh = if pen.eta == 0.0 { 0.0 } else { quad_form(h_t, &self.lap)? };
        let ru = pen.c_tu / pen.c_t;
        let re = pen.eta / pen.c_t;
        let h_prime = 1.0 / pen.c_t + ru * hu2 + re * hlh;
        let b_g = h_prime + s;
        let m = self.outputs();
        let mut terms = Vec::with_capacity(m);
        let (mut ehs, mut euhs, mut zhs) = (Vec::new(), Vec::new(), Vec::new());
        for q in 0..m {
            let eh = dot(self.e_tl.row(q), h_tl);
            let euh = dot(self.e_tu.row(q), h_tu);
            let zh = dot(self.zeta.row(q), h_t);
            terms.push(NodeTerms {
                a: (h_prime + b_g) * eh * eh,
                c: 2.0 * ru * h_prime * eh * euh,
                d: 2.0 * re * h_prime * eh * zh,
                e: -2.0 * re * ru * s * euh * zh,
                f: re * re * s * zh * zh,
                g: ru * ru * s * euh * euh,
            });
            ehs.push(eh);
            euhs.push(euh);
            zhs.push(zh);
        }
        Ok(NodeAnalysis {
            terms,
            h_prime,
            b_g,
            eh: ehs,
            euh: euhs,
            zh: zhs,
        })
    }

    /// Appends a node with fixed output weights `beta_l`, leaving earlier
    /// weights untouched, and updates residuals and ζ in place.
    pub fn append_with_weights(&mut self, node: &NodeOutputs, beta_l: &[f64]) -> Result<()> {
        self.check_node(&node.h_tl, &node.h_tu, &node.h_t)?;
        let m = self.outputs();
        if beta_l.len() != m {
            return Err(Error::DimensionMismatch(format!("{} weights for {m} outputs", beta_l.len())));
        }
        let lap_h = self.lap.mul_vec(&node.h_t)?;
        for (q, &bq) in beta_l.iter().enumerate() {
            for (e, h) in self.e_tl.row_mut(q).iter_mut().zip(&node.h_tl) {
                *e -= bq * h;
            }
            for (e, h) in self.e_tu.row_mut(q).iter_mut().zip(&node.h_tu) {
                *e -= bq * h;
            }
            for (z, lh) in self.zeta.row_mut(q).iter_mut().zip(&lap_h) {
                *z += bq * lh;
            }
        }
        self.push_outputs(node)?;
        self.beta.push_row(beta_l)?;
        Ok(())
    }

    /// Appends a node's hidden outputs without touching any weights.
    pub fn push_outputs(&mut self, node: &NodeOutputs) -> Result<()> {
        self.h_tl.push_row(&node.h_tl)?;
        self.h_tu.push_row(&node.h_tu)?;
        self.h_t.push_row(&node.h_t)
    }

    /// Replaces all output weights and recomputes residuals and ζ from scratch.
    pub fn set_weights(&mut self, beta: Matrix) -> Result<()> {
        if beta.shape() != (self.node_count(), self.outputs()) {
            return Err(Error::InconsistentState(format!(
                "weights {:?} for {} nodes",
                beta.shape(),
                self.node_count()
            )));
        }
        let bt = beta.transpose();
        self.e_tl = self.t_tl.transpose().sub(&bt.matmul(&self.h_tl)?)?;
        self.e_tu = if self.n_tu() == 0 {
            Matrix::zeros(self.outputs(), 0)
        } else {
            self.t_tu.transpose().sub(&bt.matmul(&self.h_tu)?)?
        };
        // ζ = (Lap·H_Tᵀ·β)ᵀ = βᵀ·H_T·Lap (Lap symmetric)
        self.zeta = bt.matmul(&self.h_t)?.matmul(&self.lap)?;
        self.beta = beta;
        Ok(())
    }
}

/// `ξ_q = (A + C − D − E − F − G)/b_g² − (1 − r − μ)‖e_Tl,q‖²` and `ξ = Σ_q ξ_q`.
pub fn xi_score(
    state: &GrowthState,
    h_tl: &[f64],
    h_tu: &[f64],
    h_t: &[f64],
    pen: &Penalties,
    r: f64,
    mu: f64,
) -> Result<(Vec<f64>, f64)> {
    if norm_sq(h_tl) + norm_sq(h_tu) + norm_sq(h_t) == 0.0 {
        return Err(Error::ZeroCandidate);
    }
    let analysis = state.analyze(h_tl, h_tu, h_t, pen)?;
    let margin = 1.0 - r - mu;
    let per_q: Vec<f64> = analysis
        .gains()
        .into_iter()
        .enumerate()
        .map(|(q, g)| g - margin * norm_sq(state.e_tl.row(q)))
        .collect();
    let total = per_q.iter().sum();
    Ok((per_q, total))
}

/// Output weight of a new node with every earlier weight held fixed.
pub fn single_node_weight(
    state: &GrowthState,
    h_tl: &[f64],
    h_tu: &[f64],
    h_t: &[f64],
    pen: &Penalties,
) -> Result<Vec<f64>> {
    Ok(state.analyze(h_tl, h_tu, h_t, pen)?.weights(pen))
}

/// Jointly optimal output weights for every node in `state`:
/// `(I + C_T·H_Tl·H_Tlᵀ + C_Tu·H_Tu·H_Tuᵀ + η·H_T·Lap·H_Tᵀ)⁻¹·(C_T·H_Tl·T_Tl + C_Tu·H_Tu·T_Tu)`.
pub fn global_weights_citl(state: &GrowthState, t_tl: &Matrix, pen: &Penalties) -> Result<Matrix> {
    let l = state.node_count();
    if l == 0 {
        return Err(Error::InconsistentState("global weights need at least one node".into()));
    }
    if t_tl.rows() != state.n_tl() {
        return Err(Error::DimensionMismatch(format!(
            "{} labeled targets for {} labeled samples",
            t_tl.rows(),
            state.n_tl()
        )));
    }
    let mut sys = Matrix::identity(l);
    sys.add_scaled_in_place(&state.h_tl.matmul_t(&state.h_tl)?, pen.c_t)?;
    let mut rhs = state.h_tl.matmul(t_tl)?.scale(pen.c_t);
    if state.n_tu() > 0 && pen.c_tu != 0.0 {
        sys.add_scaled_in_place(&state.h_tu.matmul_t(&state.h_tu)?, pen.c_tu)?;
        rhs.add_scaled_in_place(&state.h_tu.matmul(&state.t_tu)?, pen.c_tu)?;
    }
    if pen.eta != 0.0 {
        // H_T·Lap·H_Tᵀ; Lap is symmetric so H_T·Lap = (Lap·H_Tᵀ)ᵀ
        let hl = state.h_t.matmul(&state.lap)?;
        let mut manifold = hl.matmul_t(&state.h_t)?;
        symmetrize(&mut manifold);
        sys.add_scaled_in_place(&manifold, pen.eta)?;
    }
    solve_spd(&sys, &rhs)
}

fn symmetrize(m: &mut Matrix) {
    for i in 0..m.rows() {
        for j in (i + 1)..m.cols() {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
