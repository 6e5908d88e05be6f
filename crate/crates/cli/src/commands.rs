use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::Serialize;

use citl::citl::grow_target;
use citl::data::{apply_norm, read_canonical_csv, read_feature_csv, synth_generate, write_canonical_csv, CycleMatrix, SynthConfig};
use citl::eval::{evaluate_model, prepare_target, pretty_table, reports_to_csv, run_ablation, EvalReport, VariantRegistry};
use citl::growth::GrowthLog;
use citl::ShallowModel;

use crate::config::{Resolved, Stage};
use crate::{CliError, Tuning};

type Result<T> = std::result::Result<T, CliError>;

#[derive(Args)]
pub struct TrainSourceArgs {
    /// Labeled canonical CSV.
    #[arg(long)]
    data: PathBuf,
    /// Model JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Growth log CSV [default: <out>.growth.csv].
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
pub struct TransferArgs {
    /// Source model JSON.
    #[arg(long)]
    source_model: PathBuf,
    /// Target canonical CSV; labels past the labeled block are used for scoring only.
    #[arg(long)]
    data: PathBuf,
    /// Target model JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Growth log CSV [default: <out>.growth.csv].
    #[arg(long)]
    log: Option<PathBuf>,
    /// Report CSV [default: <out>.report.csv]; a JSON record is written next to it.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write zero timings so reports are byte-reproducible.
    #[arg(long)]
    no_timings: bool,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Feature CSV with or without a soh column.
    #[arg(long)]
    data: PathBuf,
    /// Predictions CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labeled canonical CSV.
    #[arg(long)]
    data: PathBuf,
    /// Report CSV; a JSON record is written next to it.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "evaluate")]
    task_name: String,
    #[arg(long)]
    no_timings: bool,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Directory receiving source.csv, target.csv and synth.json.
    #[arg(long)]
    out_dir: PathBuf,
    /// Flat config file; only `synth.*` keys and `seed` are used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shift: Option<f64>,
    #[arg(long)]
    n_cycles: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    fade_rate: Option<f64>,
    #[arg(long)]
    fade_exponent: Option<f64>,
}

#[derive(Args)]
pub struct AblateArgs {
    /// Source canonical CSV; omit together with --target to use synthetic tasks.
    #[arg(long, requires = "target")]
    source: Option<PathBuf>,
    /// Target canonical CSV.
    #[arg(long, requires = "source")]
    target: Option<PathBuf>,
    /// Number of seeds, starting at --seed.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Report CSV [default: stdout]; a JSON record is written next to it.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    no_timings: bool,
    #[command(flatten)]
    tuning: Tuning,
}

/// Everything needed to replay a command.
#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    seed: u64,
    config: &'a Resolved,
    #[serde(skip_serializing_if = "Option::is_none")]
    source_model: Option<&'a serde_json::Value>,
    reports: &'a [EvalReport],
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn read_cycles(path: &Path) -> Result<CycleMatrix> {
    let text = read_text(path)?;
    read_canonical_csv(text.as_bytes()).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<ShallowModel> {
    let text = read_text(path)?;
    ShallowModel::from_json(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// `<path minus extension>.<suffix>`, e.g. `m.json` → `m.growth.csv`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn write_log(log: &GrowthLog, path: &Path) -> Result<()> {
    for w in &log.warnings {
        eprintln!("warning: {w}");
    }
    write_text(path, &log.to_csv_string())
}

fn finish_reports(reports: &[EvalReport], no_timings: bool) -> Vec<EvalReport> {
    if no_timings {
        reports.iter().map(EvalReport::without_timings).collect()
    } else {
        reports.to_vec()
    }
}

fn write_record(path: &Path, record: &RunRecord<'_>) -> Result<()> {
    let text = serde_json::to_string_pretty(record).map_err(|e| CliError::input(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn train_source(a: TrainSourceArgs) -> Result<()> {
    let res = a.tuning.resolve(Stage::Source)?;
    let data = read_cycles(&a.data)?;
    let (cfg, _) = res.experiment.seeded(res.seed);
    let (model, log) = citl::rscn::train_source(&data, &cfg)?;
    write_text(&a.out, &model.to_json()?)?;
    let log_path = a.log.unwrap_or_else(|| sibling(&a.out, "growth.csv"));
    write_log(&log, &log_path)?;
    println!(
        "source model: {} nodes, residual {:.4e}, seed {} -> {}",
        model.node_count(),
        log.residuals().last().copied().unwrap_or(f64::NAN),
        res.seed,
        a.out.display()
    );
    Ok(())
}

pub fn transfer(a: TransferArgs) -> Result<()> {
    let res = a.tuning.resolve(Stage::Target)?;
    let source = load_model(&a.source_model)?;
    let target = read_cycles(&a.data)?;
    let (_, cfg) = res.experiment.seeded(res.seed);
    let split = prepare_target(&source, &target, res.experiment.split)?;
    let t0 = Instant::now();
    let (model, log) = grow_target(&split.labeled, &split.unlabeled, &source, &cfg)?;
    let train_time = t0.elapsed().as_secs_f64();
    let variant = format!("citl_{}", cfg.mode);
    let report = evaluate_model(&model, &split.test, &res.experiment.task_name, &variant, res.seed, train_time)?;
    let reports = finish_reports(&[report], a.no_timings);

    write_text(&a.out, &model.to_json()?)?;
    write_log(&log, &a.log.unwrap_or_else(|| sibling(&a.out, "growth.csv")))?;
    let report_path = a.report.unwrap_or_else(|| sibling(&a.out, "report.csv"));
    write_text(&report_path, &reports_to_csv(&reports))?;
    write_record(
        &sibling(&report_path, "json"),
        &RunRecord {
            command: "transfer",
            seed: res.seed,
            config: &res,
            source_model: Some(&source.config),
            reports: &reports,
        },
    )?;
    print!("{}", pretty_table(&reports));
    Ok(())
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let text = read_text(&a.data)?;
    let table = read_feature_csv(text.as_bytes()).map_err(|e| CliError::input(format!("{}: {e}", a.data.display())))?;
    let x = apply_norm(&table.x, &model.norm)?;
    let y = model.predict(&x)?.column(0);
    let mut out = String::from("cycle_id,soh_pred\n");
    for (id, v) in table.cycle_ids.iter().zip(&y) {
        out.push_str(&format!("{id},{v}\n"));
    }
    match &a.out {
        Some(p) => write_text(p, &out),
        None => std::io::stdout()
            .write_all(out.as_bytes())
            .map_err(|e| CliError::input(e.to_string())),
    }
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let data = read_cycles(&a.data)?.normalized(&model.norm)?;
    let kind = serde_json::to_value(model.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let report = evaluate_model(&model, &data, &a.task_name, &kind, model.seed, 0.0)?;
    let reports = finish_reports(&[report], a.no_timings);
    if let Some(p) = &a.report {
        write_text(p, &reports_to_csv(&reports))?;
        let res = Resolved::default();
        write_record(
            &sibling(p, "json"),
            &RunRecord {
                command: "evaluate",
                seed: model.seed,
                config: &res,
                source_model: Some(&model.config),
                reports: &reports,
            },
        )?;
    }
    print!("{}", pretty_table(&reports));
    Ok(())
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let mut res = Resolved::default();
    if let Some(p) = &a.config {
        res.apply_all(Stage::Target, &crate::config::read_file(p)?)?;
    }
    let flags = [
        ("seed", a.seed.map(|v| v.to_string())),
        ("synth.shift", a.shift.map(|v| v.to_string())),
        ("synth.n_cycles", a.n_cycles.map(|v| v.to_string())),
        ("synth.d", a.d.map(|v| v.to_string())),
        ("synth.noise_sd", a.noise_sd.map(|v| v.to_string())),
        ("synth.fade_rate", a.fade_rate.map(|v| v.to_string())),
        ("synth.fade_exponent", a.fade_exponent.map(|v| v.to_string())),
    ];
    let pairs: Vec<(String, String)> = flags
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
        .collect();
    res.apply_all(Stage::Target, &pairs)?;
    res.synth.seed = res.seed;
    res.synth.validate()?;
    let (source, target) = synth_generate(&res.synth)?;
    for (name, data) in [("source.csv", &source), ("target.csv", &target)] {
        let mut buf = Vec::new();
        write_canonical_csv(data, &mut buf)?;
        write_text(&a.out_dir.join(name), &String::from_utf8_lossy(&buf))?;
    }
    let echo = serde_json::to_string_pretty(&res.synth).map_err(|e| CliError::input(e.to_string()))?;
    write_text(&a.out_dir.join("synth.json"), &(echo + "\n"))?;
    println!("wrote {} source and {} target cycles to {}", source.len(), target.len(), a.out_dir.display());
    Ok(())
}

pub fn ablate(a: AblateArgs) -> Result<()> {
    let res = a.tuning.resolve(Stage::Target)?;
    let seeds: Vec<u64> = (res.seed..res.seed + a.seeds).collect();
    let registry = VariantRegistry::standard();
    let rows = match (&a.source, &a.target) {
        (Some(s), Some(t)) => run_ablation(&read_cycles(s)?, &read_cycles(t)?, &res.experiment, &seeds, &registry)?,
        _ => {
            let mut rows = Vec::new();
            for &seed in &seeds {
                let (s, t) = synth_generate(&SynthConfig { seed, ..res.synth.clone() })?;
                rows.extend(run_ablation(&s, &t, &res.experiment, &[seed], &registry)?);
            }
            rows
        }
    };
    let rows = finish_reports(&rows, a.no_timings);
    match &a.report {
        Some(p) => {
            write_text(p, &reports_to_csv(&rows))?;
            write_record(
                &sibling(p, "json"),
                &RunRecord {
                    command: "ablate",
                    seed: res.seed,
                    config: &res,
                    source_model: None,
                    reports: &rows,
                },
            )?;
            print!("{}", pretty_table(&rows));
        }
        None => print!("{}", reports_to_csv(&rows)),
    }
    Ok(())
}
