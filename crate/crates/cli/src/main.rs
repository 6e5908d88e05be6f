mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "citl", version, about = "Constructive incremental transfer learning for battery SOH estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow a source model on a labeled canonical CSV.
    TrainSource(commands::TrainSourceArgs),
    /// Grow a target model from a source model and a target CSV, then score it on every target cycle.
    Transfer(commands::TransferArgs),
    /// Predict SOH for every row of a feature CSV.
    Predict(commands::PredictArgs),
    /// Score a model on a labeled canonical CSV.
    Evaluate(commands::EvaluateArgs),
    /// Write a synthetic source/target pair as canonical CSVs.
    Synth(commands::SynthArgs),
    /// Run the four ablation variants over a range of seeds.
    Ablate(commands::AblateArgs),
}

/// Settings shared by the training commands. Flags override `--config`.
#[derive(Args, Debug, Default)]
pub struct Tuning {
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` assignment; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ridge penalty of the growth stage.
    #[arg(long = "C")]
    pub c: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub l_max: Option<usize>,
    #[arg(long)]
    pub t_max: Option<usize>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Comma-separated scale list.
    #[arg(long)]
    pub gamma_list: Option<String>,
    #[arg(long)]
    pub activation: Option<String>,
    /// Labeled-fit penalty.
    #[arg(long)]
    pub c_t: Option<f64>,
    /// Pseudo-label penalty.
    #[arg(long)]
    pub c_tu: Option<f64>,
    /// Manifold penalty.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub k_nn: Option<usize>,
    /// `global` or `incremental`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Number of leading target cycles used as labels.
    #[arg(long)]
    pub labeled: Option<usize>,
    /// Number of following target cycles used without labels.
    #[arg(long)]
    pub semisup: Option<usize>,
}

impl Tuning {
    /// Flag values as `key=value` pairs, in the order they are applied.
    fn pairs(&self) -> Result<Vec<(String, String)>, CliError> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("seed", self.seed.map(|v| v.to_string()));
        push("c", self.c.map(|v| v.to_string()));
        push("eps", self.eps.map(|v| v.to_string()));
        push("l_max", self.l_max.map(|v| v.to_string()));
        push("t_max", self.t_max.map(|v| v.to_string()));
        push("r", self.r.map(|v| v.to_string()));
        push("gamma_list", self.gamma_list.clone());
        push("activation", self.activation.clone());
        push("c_t", self.c_t.map(|v| v.to_string()));
        push("c_tu", self.c_tu.map(|v| v.to_string()));
        push("eta", self.eta.map(|v| v.to_string()));
        push("k_nn", self.k_nn.map(|v| v.to_string()));
        push("mode", self.mode.clone());
        push("labeled", self.labeled.map(|v| v.to_string()));
        push("semisup", self.semisup.map(|v| v.to_string()));
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::input(format!("--set expects KEY=VALUE, got {s:?}")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    /// Defaults, then the config file, then flags; validated.
    pub fn resolve(&self, stage: config::Stage) -> Result<config::Resolved, CliError> {
        let mut r = config::Resolved::default();
        if let Some(path) = &self.config {
            r.apply_all(stage, &config::read_file(path)?)?;
        }
        r.apply_all(stage, &self.pairs()?)?;
        r.validate()?;
        Ok(r)
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError { code: 2, msg: msg.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<citl::Error> for CliError {
    fn from(e: citl::Error) -> Self {
        let code = match e {
            citl::Error::NoCandidateFound => 3,
            citl::Error::DimensionMismatch(_) => 4,
            _ => 2,
        };
        CliError { code, msg: e.to_string() }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::TrainSource(a) => commands::train_source(a),
        Command::Transfer(a) => commands::transfer(a),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Synth(a) => commands::synth(a),
        Command::Ablate(a) => commands::ablate(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
