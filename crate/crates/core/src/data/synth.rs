//! Synthetic source/target cycle pairs.
//!
//! SOH follows `1 − fade_rate·(n/n_cycles)^fade_exponent` plus Gaussian
//! noise of standard deviation `noise_sd`. The voltage feature at normalized
//! time `τ` is
//!
//! ```text
//! v(τ) = (A0 + shift·A1) − (B0 + shift·B1)·τ − AGE·(1 − soh)·τ² + N(0, noise_sd)
//! ```
//!
//! with the coefficients below. The source domain always uses `shift = 0`.

use serde::{Deserialize, Serialize};

use super::CycleMatrix;
use crate::error::{Error, Result};
use crate::numcore::{Matrix, RngStream};

pub const A0: f64 = 4.2;
pub const A1: f64 = -0.005;
pub const B0: f64 = 0.9;
pub const B1: f64 = 0.02;
pub const AGE: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_cycles: usize,
    pub d: usize,
    pub shift: f64,
    pub noise_sd: f64,
    pub fade_rate: f64,
    pub fade_exponent: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_cycles: 120,
            d: super::DEFAULT_DIM,
            shift: 0.5,
            noise_sd: 0.005,
            fade_rate: 0.2,
            fade_exponent: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_cycles < 40 {
            return bad("n_cycles must be at least 40");
        }
        if self.d < 2 {
            return bad("d must be at least 2");
        }
        if !(self.shift >= 0.0) || !self.shift.is_finite() {
            return bad("shift must be finite and >= 0");
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return bad("noise_sd must be finite and >= 0");
        }
        if !(self.fade_rate > 0.0 && self.fade_rate < 1.0) {
            return bad("fade_rate must lie in (0, 1)");
        }
        if !(self.fade_exponent > 0.0) || !self.fade_exponent.is_finite() {
            return bad("fade_exponent must be finite and > 0");
        }
        Ok(())
    }
}

fn domain(cfg: &SynthConfig, shift: f64, mut rng: RngStream) -> Result<CycleMatrix> {
    let n = cfg.n_cycles;
    let d = cfg.d;
    let mut soh = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * d);
    let offset = A0 + shift * A1;
    let slope = B0 + shift * B1;
    for c in 0..n {
        let frac = c as f64 / n as f64;
        let s = 1.0 - cfg.fade_rate * frac.powf(cfg.fade_exponent) + cfg.noise_sd * rng.standard_normal();
        for k in 0..d {
            let tau = k as f64 / (d - 1) as f64;
            let v = offset - slope * tau - AGE * (1.0 - s) * tau * tau
                + cfg.noise_sd * rng.standard_normal();
            data.push(v);
        }
        soh.push(s);
    }
    CycleMatrix::new(Matrix::from_vec(n, d, data)?, soh, (0..n as u64).collect())
}

/// Generates `(source, target)`; fully determined by `cfg`.
pub fn synth_generate(cfg: &SynthConfig) -> Result<(CycleMatrix, CycleMatrix)> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed);
    let source = domain(cfg, 0.0, root.fork(0))?;
    let target = domain(cfg, cfg.shift, root.fork(1))?;
    Ok((source, target))
}
