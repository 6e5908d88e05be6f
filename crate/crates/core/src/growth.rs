//! Pieces shared by source and target growth: configuration, random
//! candidate generation, the admission/relaxation search and the per-node log.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Activation;
use crate::numcore::RngStream;

/// Relaxation rounds tried after the plain admission test fails.
pub const RELAX_ROUNDS: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowConfig {
    pub l_max: usize,
    pub t_max: usize,
    pub eps: f64,
    pub gamma_list: Vec<f64>,
    /// Contraction factor, in (0, 1).
    pub r: f64,
    /// Ridge penalty on the source residual.
    pub c: f64,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for GrowConfig {
    fn default() -> Self {
        GrowConfig {
            l_max: 200,
            t_max: 50,
            eps: 0.01,
            gamma_list: vec![0.5, 1.0, 5.0, 10.0, 50.0, 100.0, 200.0],
            r: 0.9,
            c: 1024.0,
            activation: Activation::Sigmoid,
            seed: 0,
        }
    }
}

impl GrowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.eps > 0.0) {
            return bad(format!("eps must be > 0, got {}", self.eps));
        }
        if self.l_max == 0 || self.t_max == 0 {
            return bad("l_max and t_max must be at least 1".into());
        }
        if self.gamma_list.is_empty() || self.gamma_list.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return bad("gamma_list must be non-empty and positive".into());
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return bad(format!("r must lie in (0, 1), got {}", self.r));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return bad(format!("C must be finite and > 0, got {}", self.c));
        }
        Ok(())
    }
}

/// `μ_L = (1 − r)/(L + 1)` for the node being added (1-based `L`).
pub fn mu_schedule(r: f64, node: usize) -> f64 {
    (1.0 - r) / (node as f64 + 1.0)
}

/// One random hidden-node draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub omega: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
}

impl Candidate {
    pub fn draw(rng: &mut RngStream, d: usize, gamma: f64) -> Self {
        let omega = (0..d).map(|_| rng.uniform_in(-gamma, gamma)).collect();
        let bias = rng.uniform_in(-gamma, gamma);
        Candidate { omega, bias, gamma }
    }
}

/// Which inequality a candidate must meet to be admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    /// Summed score over outputs must be non-negative.
    Total,
    /// Every per-output score must be non-negative.
    PerOutput,
}

/// Per-output residual reduction a candidate would produce, before the
/// contraction margin is subtracted.
#[derive(Debug, Clone)]
pub struct Gain<T> {
    pub per_output: Vec<f64>,
    pub payload: T,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fallback {
    None,
    /// Admitted after halving the contraction margin this many times.
    Relaxed(u32),
    /// No candidate was admitted; the best one was taken anyway.
    Forced,
}

impl fmt::Display for Fallback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fallback::None => f.write_str("none"),
            Fallback::Relaxed(k) => write!(f, "relaxed{k}"),
            Fallback::Forced => f.write_str("forced"),
        }
    }
}

/// Winner of a candidate search.
#[derive(Debug, Clone)]
pub struct Selected<T> {
    pub candidate: Candidate,
    pub per_output: Vec<f64>,
    pub score: f64,
    /// Margin factor `(1 − r − μ)` the winner was admitted under.
    pub margin: f64,
    pub fallback: Fallback,
    pub payload: T,
}

/// Runs the γ sweep: for each γ draw `t_max` candidates, keep the admitted
/// ones and return the best as soon as one γ yields any. When a whole sweep
/// admits nothing the margin `(1 − r − μ)` is halved and the sweep repeated,
/// up to [`RELAX_ROUNDS`] times; after that the candidate with the largest
/// total gain seen is returned as [`Fallback::Forced`].
///
/// `residual_sq[q]` is `‖e_q‖²`. Ties go to the earliest candidate drawn.
pub fn search_node<T, F>(
    rng: &mut RngStream,
    d: usize,
    gammas: &[f64],
    t_max: usize,
    base_margin: f64,
    residual_sq: &[f64],
    admission: Admission,
    score: F,
) -> Result<Selected<T>>
where
    T: Clone + Send,
    F: Fn(&Candidate) -> Result<Option<Gain<T>>> + Sync,
{
    let mut best_forced: Option<(f64, Candidate, Gain<T>)> = None;
    for round in 0..=RELAX_ROUNDS {
        let margin = base_margin / f64::from(1u32 << round);
        for &gamma in gammas {
            let pool: Vec<Candidate> = (0..t_max).map(|_| Candidate::draw(rng, d, gamma)).collect();
            let scored: Vec<Option<Gain<T>>> = pool
                .par_iter()
                .map(&score)
                .collect::<Result<Vec<_>>>()?;
            let mut winner: Option<(f64, usize)> = None;
            for (idx, g) in scored.iter().enumerate() {
                let Some(g) = g else { continue };
                let xi: Vec<f64> = g
                    .per_output
                    .iter()
                    .zip(residual_sq)
                    .map(|(gain, e2)| gain - margin * e2)
                    .collect();
                let total: f64 = xi.iter().sum();
                if !total.is_finite() {
                    continue;
                }
                let admitted = match admission {
                    Admission::Total => total >= 0.0,
                    Admission::PerOutput => xi.iter().all(|&v| v >= 0.0),
                };
                if admitted && winner.map_or(true, |(s, _)| total > s) {
                    winner = Some((total, idx));
                }
                let raw: f64 = g.per_output.iter().sum();
                if best_forced.as_ref().map_or(true, |(s, _, _)| raw > *s) {
                    best_forced = Some((raw, pool[idx].clone(), g.clone()));
                }
            }
            if let Some((total, idx)) = winner {
                let mut scored = scored;
                let g = scored.swap_remove(idx).expect("winner was scored");
                return Ok(Selected {
                    candidate: pool[idx].clone(),
                    per_output: g.per_output,
                    score: total,
                    margin,
                    fallback: if round == 0 {
                        Fallback::None
                    } else {
                        Fallback::Relaxed(round)
                    },
                    payload: g.payload,
                });
            }
        }
    }
    let (_, candidate, g) = best_forced.ok_or(Error::NoCandidateFound)?;
    let margin = base_margin / f64::from(1u32 << RELAX_ROUNDS);
    let score = g
        .per_output
        .iter()
        .zip(residual_sq)
        .map(|(gain, e2)| gain - margin * e2)
        .sum();
    log::warn!(
        "no candidate admitted after {RELAX_ROUNDS} relaxation rounds; forcing best (score {score:e})"
    );
    Ok(Selected {
        candidate,
        per_output: g.per_output,
        score,
        margin,
        fallback: Fallback::Forced,
        payload: g.payload,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node: usize,
    pub gamma: f64,
    /// ℘ for source growth, ξ for target growth.
    pub score: f64,
    /// ‖e‖_F on the labeled block after the node's weights were set.
    pub residual_fro: f64,
    pub mode: String,
    pub fallback: Fallback,
    /// Margin factor `(1 − r − μ)` the node was admitted under.
    pub margin: f64,
    pub prev_residual_fro: f64,
    pub min_xi: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GrowthLog {
    pub initial_residual_fro: f64,
    pub nodes: Vec<NodeRecord>,
    pub warnings: Vec<String>,
}

impl GrowthLog {
    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    pub fn residuals(&self) -> Vec<f64> {
        std::iter::once(self.initial_residual_fro)
            .chain(self.nodes.iter().map(|n| n.residual_fro))
            .collect()
    }

    /// `node,gamma,xi,residual_fro,mode,fallback`
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "node,gamma,xi,residual_fro,mode,fallback")?;
        for n in &self.nodes {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                n.node, n.gamma, n.score, n.residual_fro, n.mode, n.fallback
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}
