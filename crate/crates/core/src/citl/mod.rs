//! Target estimator: constructive growth against a semi-supervised
//! objective. Unlabeled target cycles enter twice, through source-model
//! pseudo-labels and through a graph-Laplacian smoothness penalty.

mod laplacian;
mod state;
mod update;

pub use laplacian::build_laplacian;
pub use state::{
    global_weights_citl, single_node_weight, xi_score, GrowthState, NodeAnalysis, NodeOutputs, NodeTerms,
    Penalties,
};
pub use update::{GlobalUpdate, IncrementalUpdate, UpdateRegistry, WeightUpdate};

use serde::{Deserialize, Serialize};

use crate::data::{CycleMatrix, UnlabeledSet};
use crate::error::{Error, Result};
use crate::growth::{mu_schedule, search_node, Admission, Gain, GrowConfig, GrowthLog, NodeRecord};
use crate::model::{ModelKind, ShallowModel};
use crate::numcore::{norm_sq, Matrix, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    #[serde(flatten)]
    pub grow: GrowConfig,
    pub c_t: f64,
    pub c_tu: f64,
    pub eta: f64,
    pub k_nn: usize,
    /// Name of a registered [`WeightUpdate`].
    pub mode: String,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            grow: GrowConfig::default(),
            c_t: 1.0,
            c_tu: 10.0,
            eta: 0.01,
            k_nn: 5,
            mode: "global".into(),
        }
    }
}

impl TransferConfig {
    pub fn penalties(&self) -> Penalties {
        Penalties {
            c_t: self.c_t,
            c_tu: self.c_tu,
            eta: self.eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grow.validate()?;
        if !(self.c_t > 0.0) || !self.c_t.is_finite() {
            return Err(Error::InvalidConfig(format!("C_T must be > 0, got {}", self.c_t)));
        }
        if !(self.c_tu >= 0.0) || !self.c_tu.is_finite() {
            return Err(Error::InvalidConfig(format!("C_Tu must be >= 0, got {}", self.c_tu)));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidConfig(format!("eta must be >= 0, got {}", self.eta)));
        }
        if self.k_nn == 0 {
            return Err(Error::InvalidConfig("k_nn must be at least 1".into()));
        }
        UpdateRegistry::standard().get(&self.mode)?;
        Ok(())
    }
}

/// Source-model predictions on unlabeled target inputs.
pub fn pseudo_labels(source: &ShallowModel, x_tu: &Matrix) -> Result<Matrix> {
    source.predict(x_tu)
}

/// Predictions of a grown target model; same formula as the source model.
pub fn predict_target(model: &ShallowModel, x: &Matrix) -> Result<Matrix> {
    crate::model::predict(model, x)
}

/// Stacks labeled rows over unlabeled rows.
fn stack_rows(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let mut out = a.clone();
    for i in 0..b.rows() {
        out.push_row(b.row(i))?;
    }
    Ok(out)
}

/// Builds the zero-node growth state for a target task.
pub fn initial_state(
    labeled: &CycleMatrix,
    unlabeled: &UnlabeledSet,
    source: &ShallowModel,
    k_nn: usize,
) -> Result<GrowthState> {
    let t_tu = if unlabeled.is_empty() {
        Matrix::zeros(0, source.m)
    } else {
        pseudo_labels(source, &unlabeled.x)?
    };
    let x_t = stack_rows(&labeled.x, &unlabeled.x)?;
    let lap = build_laplacian(&x_t, k_nn)?;
    GrowthState::new(labeled.targets(), t_tu, lap)
}

/// Grows the target model with the update rule named in `cfg.mode`, using
/// the rules in `registry`. Inputs must be normalized with `source.norm`.
pub fn grow_target_with(
    labeled: &CycleMatrix,
    unlabeled: &UnlabeledSet,
    source: &ShallowModel,
    cfg: &TransferConfig,
    registry: &UpdateRegistry,
) -> Result<(ShallowModel, GrowthLog)> {
    cfg.validate()?;
    let rule = registry.get(&cfg.mode)?;
    if labeled.is_empty() {
        return Err(Error::EmptyData);
    }
    if unlabeled.is_empty() && (cfg.c_tu > 0.0 || cfg.eta > 0.0) {
        return Err(Error::EmptyData);
    }
    let d = source.d;
    if labeled.dim() != d || (!unlabeled.is_empty() && unlabeled.x.cols() != d) {
        return Err(Error::DimensionMismatch(format!(
            "source model has d={d}, target data has {} features",
            labeled.dim()
        )));
    }
    if source.m != 1 {
        return Err(Error::DimensionMismatch(format!(
            "source model has {} outputs, SOH labels have 1",
            source.m
        )));
    }

    let pen = cfg.penalties();
    let x_tu = if unlabeled.is_empty() {
        Matrix::zeros(0, d)
    } else {
        unlabeled.x.clone()
    };
    let mut state = initial_state(labeled, unlabeled, source, cfg.k_nn)?;
    let m = state.outputs();
    let mut rng = RngStream::new(cfg.grow.seed);
    let mut model = ShallowModel::empty(ModelKind::Citl, d, m, cfg.grow.activation, source.norm.clone());
    model.seed = cfg.grow.seed;
    model.config = serde_json::to_value(cfg)?;
    let mut log = GrowthLog {
        initial_residual_fro: state.residual_fro(),
        ..GrowthLog::default()
    };
    let act = cfg.grow.activation;

    while state.node_count() < cfg.grow.l_max && state.residual_fro() > cfg.grow.eps {
        let node = state.node_count() + 1;
        let mu = mu_schedule(cfg.grow.r, node);
        let residual_sq: Vec<f64> = (0..m).map(|q| norm_sq(state.e_tl.row(q))).collect();
        let st = &state;
        let x_tl = &labeled.x;
        let x_tu = &x_tu;
        let sel = search_node(
            &mut rng,
            d,
            &cfg.grow.gamma_list,
            cfg.grow.t_max,
            1.0 - cfg.grow.r - mu,
            &residual_sq,
            Admission::PerOutput,
            |cand| {
                let outs = NodeOutputs::compute(&cand.omega, cand.bias, act, x_tl, x_tu);
                if norm_sq(&outs.h_t) == 0.0 {
                    return Ok(None);
                }
                let analysis = st.analyze(&outs.h_tl, &outs.h_tu, &outs.h_t, &pen)?;
                Ok(Some(Gain {
                    per_output: analysis.gains(),
                    payload: outs,
                }))
            },
        )?;
        let min_xi = sel
            .per_output
            .iter()
            .zip(&residual_sq)
            .map(|(g, e2)| g - sel.margin * e2)
            .fold(f64::INFINITY, f64::min);
        let prev = state.residual_fro();
        rule.append(&mut state, &sel.payload, &pen)?;

        model.w.push_row(&sel.candidate.omega)?;
        model.b.push(sel.candidate.bias);
        log.nodes.push(NodeRecord {
            node,
            gamma: sel.candidate.gamma,
            score: sel.score,
            residual_fro: state.residual_fro(),
            mode: rule.name().to_string(),
            fallback: sel.fallback,
            margin: sel.margin,
            prev_residual_fro: prev,
            min_xi,
        });
    }
    model.beta = state.beta.clone();
    if model.node_count() == 0 {
        log.warn(format!(
            "initial labeled residual {:.3e} already within eps {:.3e}; model has no nodes and predicts zero",
            log.initial_residual_fro, cfg.grow.eps
        ));
    }
    Ok((model, log))
}

/// [`grow_target_with`] using the standard update rules.
pub fn grow_target(
    labeled: &CycleMatrix,
    unlabeled: &UnlabeledSet,
    source: &ShallowModel,
    cfg: &TransferConfig,
) -> Result<(ShallowModel, GrowthLog)> {
    grow_target_with(labeled, unlabeled, source, cfg, &UpdateRegistry::standard())
}

/// Normalizes raw target blocks with the source statistics and grows.
pub fn transfer(
    labeled_raw: &CycleMatrix,
    unlabeled_raw: &UnlabeledSet,
    source: &ShallowModel,
    cfg: &TransferConfig,
) -> Result<(ShallowModel, GrowthLog)> {
    if labeled_raw.dim() != source.d {
        return Err(Error::DimensionMismatch(format!(
            "source model has d={}, target data has {} features",
            source.d,
            labeled_raw.dim()
        )));
    }
    let labeled = labeled_raw.normalized(&source.norm)?;
    let unlabeled = unlabeled_raw.normalized(&source.norm)?;
    grow_target(&labeled, &unlabeled, source, cfg)
}
