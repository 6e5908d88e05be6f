//! Plain random search over the three target penalties.

use serde::{Deserialize, Serialize};

use crate::citl::TransferConfig;
use crate::error::{Error, Result};
use crate::numcore::RngStream;

/// Log-uniform ranges; `c_tu` and `eta` ranges may start at zero, in which
/// case zero is drawn with probability `zero_prob`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub c_t: (f64, f64),
    pub c_tu: (f64, f64),
    pub eta: (f64, f64),
    pub zero_prob: f64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            c_t: (1.0, 1e5),
            c_tu: (1e-2, 1e4),
            eta: (1e-3, 1e3),
            zero_prob: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub c_t: f64,
    pub c_tu: f64,
    pub eta: f64,
    pub score: f64,
}

fn log_uniform(rng: &mut RngStream, (lo, hi): (f64, f64), zero_prob: f64) -> f64 {
    if lo == 0.0 || rng.uniform() < zero_prob {
        return 0.0;
    }
    (rng.uniform_in(lo.ln(), hi.ln())).exp()
}

/// Evaluates `trials` random penalty triples with `score` (lower is better)
/// and returns them sorted best first. Ties keep draw order.
pub fn random_search<F>(base: &TransferConfig, space: &SearchSpace, trials: usize, seed: u64, score: F) -> Result<Vec<Trial>>
where
    F: Fn(&TransferConfig) -> Result<f64>,
{
    for (name, (lo, hi)) in [("c_t", space.c_t), ("c_tu", space.c_tu), ("eta", space.eta)] {
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!("bad search range for {name}: [{lo}, {hi}]")));
        }
    }
    if !(space.c_t.0 > 0.0) {
        return Err(Error::InvalidConfig("c_t range must be positive".into()));
    }
    let mut rng = RngStream::new(seed);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let cfg = TransferConfig {
            c_t: log_uniform(&mut rng, space.c_t, 0.0),
            c_tu: log_uniform(&mut rng, space.c_tu, space.zero_prob),
            eta: log_uniform(&mut rng, space.eta, space.zero_prob),
            ..base.clone()
        };
        let s = score(&cfg)?;
        out.push(Trial {
            c_t: cfg.c_t,
            c_tu: cfg.c_tu,
            eta: cfg.eta,
            score: s,
        });
    }
    out.sort_by(|a, b| a.score.total_cmp(&b.score));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_known_minimum_region() {
        let space = SearchSpace::default();
        let trials = random_search(&TransferConfig::default(), &space, 200, 4, |c| {
            Ok((c.c_t.log10() - 2.0).powi(2) + (c.eta.log10()).powi(2))
        })
        .unwrap();
        assert_eq!(trials.len(), 200);
        assert!(trials.windows(2).all(|w| w[0].score <= w[1].score));
        assert!(trials[0].score < 0.5);
        for t in &trials {
            assert!((1.0..=1e5).contains(&t.c_t));
        }
    }
}
