//! Source estimator: nodes are added one at a time under the supervisory
//! quality factor ℘, and all output weights are re-solved by regularized
//! least squares after every accepted node.

use crate::data::{CycleMatrix, NormStats};
use crate::error::{Error, Result};
use crate::growth::{mu_schedule, search_node, Admission, Gain, GrowConfig, GrowthLog, NodeRecord};
use crate::model::{node_output, ModelKind, ShallowModel};
use crate::numcore::{dot, norm_sq, solve_spd, Matrix, RngStream};

pub use crate::model::{hidden_output, predict};

/// Residual reduction from appending `h` with its optimal single ridge weight:
/// `⟨e,h⟩²(‖h‖² + 2/C)/(‖h‖² + 1/C)²`.
fn ridge_gain(e: &[f64], h: &[f64], hh: f64, c: f64) -> f64 {
    let eh = dot(e, h);
    let denom = hh + 1.0 / c;
    eh * eh * (hh + 2.0 / c) / (denom * denom)
}

/// Quality factor ℘ of a candidate with hidden output `h` against the
/// residual `e` (m×N, one row per output).
pub fn quality_factor(e: &Matrix, h: &[f64], c: f64, r: f64, mu: f64) -> Result<f64> {
    if e.cols() != h.len() {
        return Err(Error::DimensionMismatch(format!(
            "residual has {} samples, candidate {}",
            e.cols(),
            h.len()
        )));
    }
    let hh = norm_sq(h);
    if hh == 0.0 {
        return Err(Error::ZeroCandidate);
    }
    let gain: f64 = (0..e.rows()).map(|q| ridge_gain(e.row(q), h, hh, c)).sum();
    Ok(gain - (1.0 - r - mu) * e.frobenius_sq())
}

/// `β = (H·Hᵀ + I/C)⁻¹·H·T`, the minimizer of `½‖β‖² + (C/2)‖T − Hᵀβ‖²`.
pub fn global_weights_ridge(h: &Matrix, t: &Matrix, c: f64) -> Result<Matrix> {
    if !(c > 0.0) {
        return Err(Error::InvalidConfig(format!("C must be > 0, got {c}")));
    }
    if h.cols() != t.rows() {
        return Err(Error::DimensionMismatch(format!(
            "H has {} samples, T has {}",
            h.cols(),
            t.rows()
        )));
    }
    let mut gram = h.matmul_t(h)?;
    for i in 0..gram.rows() {
        gram[(i, i)] += 1.0 / c;
    }
    solve_spd(&gram, &h.matmul(t)?)
}

/// Residual `Tᵀ − βᵀH` as an m×N matrix.
pub(crate) fn residual(t: &Matrix, h: &Matrix, beta: &Matrix) -> Result<Matrix> {
    let pred = beta.transpose().matmul(h)?;
    t.transpose().sub(&pred)
}

/// Grows a source model on `data`, whose features must already be
/// normalized with `norm`.
pub fn grow_source(data: &CycleMatrix, norm: NormStats, cfg: &GrowConfig) -> Result<(ShallowModel, GrowthLog)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    grow_ridge(&data.x, &data.targets(), norm, cfg, ModelKind::Rscn)
}

/// Fits normalization on `raw` and grows a source model on it.
pub fn train_source(raw: &CycleMatrix, cfg: &GrowConfig) -> Result<(ShallowModel, GrowthLog)> {
    let norm = crate::data::fit_norm(&raw.x)?;
    let data = raw.normalized(&norm)?;
    grow_source(&data, norm, cfg)
}

pub(crate) fn grow_ridge(
    x: &Matrix,
    t: &Matrix,
    norm: NormStats,
    cfg: &GrowConfig,
    kind: ModelKind,
) -> Result<(ShallowModel, GrowthLog)> {
    let (n, d) = x.shape();
    let m = t.cols();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if t.rows() != n {
        return Err(Error::DimensionMismatch(format!("{n} inputs, {} targets", t.rows())));
    }
    let mut rng = RngStream::new(cfg.seed);
    let mut model = ShallowModel::empty(kind, d, m, cfg.activation, norm);
    model.seed = cfg.seed;
    model.config = serde_json::to_value(cfg)?;

    let mut h = Matrix::zeros(0, n);
    let mut gram = Matrix::zeros(0, 0);
    let mut ht = Matrix::zeros(0, m);
    let mut e = t.transpose();
    let mut log = GrowthLog {
        initial_residual_fro: e.frobenius_norm(),
        ..GrowthLog::default()
    };

    while model.node_count() < cfg.l_max && e.frobenius_norm() > cfg.eps {
        let node = model.node_count() + 1;
        let mu = mu_schedule(cfg.r, node);
        let residual_sq: Vec<f64> = (0..m).map(|q| norm_sq(e.row(q))).collect();
        let c = cfg.c;
        let e_ref = &e;
        let act = cfg.activation;
        let sel = search_node(
            &mut rng,
            d,
            &cfg.gamma_list,
            cfg.t_max,
            1.0 - cfg.r - mu,
            &residual_sq,
            Admission::Total,
            |cand| {
                let hv = node_output(&cand.omega, cand.bias, act, x);
                let hh = norm_sq(&hv);
                if hh == 0.0 || !hh.is_finite() {
                    return Ok(None);
                }
                let per_output = (0..m).map(|q| ridge_gain(e_ref.row(q), &hv, hh, c)).collect();
                Ok(Some(Gain {
                    per_output,
                    payload: hv,
                }))
            },
        )?;
        let hv = sel.payload;

        // grow the Gram matrix and H·T by one row/column
        let l = h.rows();
        let mut g2 = Matrix::zeros(l + 1, l + 1);
        for i in 0..l {
            g2.row_mut(i)[..l].copy_from_slice(gram.row(i));
            let v = dot(h.row(i), &hv);
            g2[(i, l)] = v;
            g2[(l, i)] = v;
        }
        g2[(l, l)] = norm_sq(&hv);
        gram = g2;
        let new_ht: Vec<f64> = (0..m).map(|q| dot(&hv, &t.column(q))).collect();
        ht.push_row(&new_ht)?;
        h.push_row(&hv)?;

        let mut sys = gram.clone();
        for i in 0..=l {
            sys[(i, i)] += 1.0 / c;
        }
        let beta = solve_spd(&sys, &ht)?;
        let prev = e.frobenius_norm();
        e = residual(t, &h, &beta)?;

        model.w.push_row(&sel.candidate.omega)?;
        model.b.push(sel.candidate.bias);
        model.beta = beta;
        log.nodes.push(NodeRecord {
            node,
            gamma: sel.candidate.gamma,
            score: sel.score,
            residual_fro: e.frobenius_norm(),
            mode: "ridge".into(),
            fallback: sel.fallback,
            margin: sel.margin,
            prev_residual_fro: prev,
            min_xi: sel.score,
        });
    }
    if model.node_count() == 0 {
        log.warn(format!(
            "initial residual {:.3e} already within eps {:.3e}; model has no nodes and predicts zero",
            log.initial_residual_fro, cfg.eps
        ));
    }
    Ok((model, log))
}
