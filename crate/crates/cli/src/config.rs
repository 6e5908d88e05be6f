//! Flat `key=value` settings. Later assignments override earlier ones, so
//! file values are applied first and command-line flags last.

use std::path::Path;

use citl::data::SynthConfig;
use citl::eval::ExperimentConfig;
use citl::growth::GrowConfig;
use serde::Serialize;

use crate::CliError;

/// Which growth stage unprefixed grow keys (`eps`, `c`, ...) refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Source,
    Target,
}

/// Fully resolved settings of one command, echoed into its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub seed: u64,
    pub experiment: ExperimentConfig,
    pub synth: SynthConfig,
}

impl Default for Resolved {
    fn default() -> Self {
        Resolved {
            seed: 0,
            experiment: ExperimentConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

pub const GROW_KEYS: [&str; 7] = ["l_max", "t_max", "eps", "gamma_list", "r", "c", "activation"];

/// Parses config text: one `key = value` per line, `#` starts a comment.
pub fn parse_flat(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value, found {line:?}", no + 1))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(format!("line {}: empty key", no + 1));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

pub fn read_file(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
    parse_flat(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("invalid value {v:?} for {key}"))
}

fn set_grow(g: &mut GrowConfig, key: &str, full_key: &str, v: &str) -> Result<(), String> {
    match key {
        "l_max" => g.l_max = num(full_key, v)?,
        "t_max" => g.t_max = num(full_key, v)?,
        "eps" => g.eps = num(full_key, v)?,
        "r" => g.r = num(full_key, v)?,
        "c" => g.c = num(full_key, v)?,
        "activation" => g.activation = v.parse().map_err(|e: citl::Error| e.to_string())?,
        "gamma_list" => {
            g.gamma_list = v
                .split(',')
                .map(|s| num(full_key, s.trim()))
                .collect::<Result<_, _>>()?
        }
        _ => return Err(format!("unknown config key {full_key:?}")),
    }
    Ok(())
}

impl Resolved {
    /// Applies one assignment. Unknown keys are an error.
    pub fn set(&mut self, stage: Stage, key: &str, v: &str) -> Result<(), String> {
        let e = &mut self.experiment;
        if let Some(k) = key.strip_prefix("source.") {
            return set_grow(&mut e.source, k, key, v);
        }
        if let Some(k) = key.strip_prefix("target.") {
            return set_grow(&mut e.transfer.grow, k, key, v);
        }
        if let Some(k) = key.strip_prefix("synth.") {
            let s = &mut self.synth;
            match k {
                "n_cycles" => s.n_cycles = num(key, v)?,
                "d" => s.d = num(key, v)?,
                "shift" => s.shift = num(key, v)?,
                "noise_sd" => s.noise_sd = num(key, v)?,
                "fade_rate" => s.fade_rate = num(key, v)?,
                "fade_exponent" => s.fade_exponent = num(key, v)?,
                _ => return Err(format!("unknown config key {key:?}")),
            }
            return Ok(());
        }
        if GROW_KEYS.contains(&key) {
            let g = match stage {
                Stage::Source => &mut e.source,
                Stage::Target => &mut e.transfer.grow,
            };
            return set_grow(g, key, key, v);
        }
        match key {
            "seed" => self.seed = num(key, v)?,
            "task_name" => e.task_name = v.to_string(),
            "c_t" => e.transfer.c_t = num(key, v)?,
            "c_tu" => e.transfer.c_tu = num(key, v)?,
            "eta" => e.transfer.eta = num(key, v)?,
            "k_nn" => e.transfer.k_nn = num(key, v)?,
            "mode" => e.transfer.mode = v.to_string(),
            "labeled" => e.split.labeled_count = num(key, v)?,
            "semisup" => e.split.semisup_unlabeled_count = num(key, v)?,
            "baseline_c" => e.baseline_c = num(key, v)?,
            _ => return Err(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    pub fn apply_all(&mut self, stage: Stage, pairs: &[(String, String)]) -> Result<(), CliError> {
        for (k, v) in pairs {
            self.set(stage, k, v).map_err(CliError::input)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.experiment.validate()?;
        self.synth.validate()?;
        let s = self.experiment.split;
        if s.labeled_count == 0 || s.semisup_unlabeled_count == 0 {
            return Err(CliError::input("labeled and semisup must be at least 1"));
        }
        Ok(())
    }
}
