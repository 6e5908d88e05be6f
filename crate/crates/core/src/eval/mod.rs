//! Metrics, the transfer task runner and the four-variant ablation harness.

mod metrics;
mod report;
mod search;
mod variants;

pub use metrics::{r2, rmse};
pub use report::{pretty_table, reports_to_csv, write_reports_csv, EvalReport, REPORT_HEADER};
pub use search::{random_search, SearchSpace, Trial};
pub use variants::{Baseline, FullCitl, NoManifold, StructuralRiskOnly, Variant, VariantRegistry};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::citl::TransferConfig;
use crate::data::{split_protocol, CycleMatrix, SplitSpec, TargetSplit};
use crate::error::{Error, Result};
use crate::growth::{GrowConfig, GrowthLog};
use crate::model::ShallowModel;
use crate::numcore::derive_seed;

/// Everything a source→target experiment needs besides the data and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task_name: String,
    pub source: GrowConfig,
    pub transfer: TransferConfig,
    pub split: SplitSpec,
    /// Ridge penalty of the label-only baseline.
    pub baseline_c: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task_name: "source->target".into(),
            source: GrowConfig::default(),
            transfer: TransferConfig::default(),
            split: SplitSpec::default(),
            baseline_c: 1e6,
        }
    }
}

impl ExperimentConfig {
    /// Source and target growth configs with their seeds derived from `seed`.
    pub fn seeded(&self, seed: u64) -> (GrowConfig, TransferConfig) {
        let mut src = self.source.clone();
        src.seed = derive_seed(seed, 0);
        let mut tgt = self.transfer.clone();
        tgt.grow.seed = derive_seed(seed, 1);
        (src, tgt)
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.transfer.validate()?;
        if !(self.baseline_c > 0.0) || !self.baseline_c.is_finite() {
            return Err(Error::InvalidConfig(format!("baseline_c must be > 0, got {}", self.baseline_c)));
        }
        Ok(())
    }
}

/// Target data split per the protocol and normalized with the source statistics.
pub fn prepare_target(source: &ShallowModel, target: &CycleMatrix, split: SplitSpec) -> Result<TargetSplit> {
    if target.dim() != source.d {
        return Err(Error::DimensionMismatch(format!(
            "source model has d={}, target data has {} features",
            source.d,
            target.dim()
        )));
    }
    let s = split_protocol(target, split)?;
    Ok(TargetSplit {
        labeled: s.labeled.normalized(&source.norm)?,
        unlabeled: s.unlabeled.normalized(&source.norm)?,
        test: s.test.normalized(&source.norm)?,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Scores `model` on the (normalized) test block.
pub fn evaluate_model(
    model: &ShallowModel,
    test: &CycleMatrix,
    task_name: &str,
    variant: &str,
    seed: u64,
    train_time_s: f64,
) -> Result<EvalReport> {
    let mut times = Vec::with_capacity(5);
    let mut pred = None;
    for _ in 0..5 {
        let t0 = Instant::now();
        let p = model.predict(&test.x)?;
        times.push(t0.elapsed().as_secs_f64() * 1e3);
        pred = Some(p);
    }
    let yhat = pred.expect("five passes ran").column(0);
    Ok(EvalReport {
        task_name: task_name.to_string(),
        variant: variant.to_string(),
        seed,
        rmse_pct: 100.0 * rmse(&test.soh, &yhat)?,
        r2: r2(&test.soh, &yhat)?,
        train_time_s,
        predict_time_ms: median(times),
        node_count: model.node_count(),
    })
}

/// Result of one variant on one seed, with the trained model and its log.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub report: EvalReport,
    pub model: ShallowModel,
    pub log: GrowthLog,
}

/// Trains a source model on `source_data` and applies `variant` to the target.
pub fn run_variant(
    source_data: &CycleMatrix,
    target_data: &CycleMatrix,
    cfg: &ExperimentConfig,
    variant: &dyn Variant,
    seed: u64,
) -> Result<TaskOutcome> {
    cfg.validate()?;
    let (src_cfg, _) = cfg.seeded(seed);
    let t0 = Instant::now();
    let (source, _) = crate::rscn::train_source(source_data, &src_cfg)?;
    let source_time = t0.elapsed().as_secs_f64();
    run_variant_with_source(&source, source_time, target_data, cfg, variant, seed)
}

fn run_variant_with_source(
    source: &ShallowModel,
    source_time_s: f64,
    target_data: &CycleMatrix,
    cfg: &ExperimentConfig,
    variant: &dyn Variant,
    seed: u64,
) -> Result<TaskOutcome> {
    let split = prepare_target(source, target_data, cfg.split)?;
    let t0 = Instant::now();
    let (model, log) = variant.train(source, &split, cfg, seed)?;
    let train_time = source_time_s + t0.elapsed().as_secs_f64();
    let report = evaluate_model(&model, &split.test, &cfg.task_name, variant.name(), seed, train_time)?;
    Ok(TaskOutcome { report, model, log })
}

/// Full CITL on one seed: source growth, protocol split, target growth and
/// evaluation on every target cycle.
pub fn run_task(source_data: &CycleMatrix, target_data: &CycleMatrix, cfg: &ExperimentConfig, seed: u64) -> Result<EvalReport> {
    Ok(run_variant(source_data, target_data, cfg, &FullCitl, seed)?.report)
}

/// Every registered variant on every seed. Variants of one seed share the
/// same source model. Rows are ordered by seed, then by registry order.
pub fn run_ablation(
    source_data: &CycleMatrix,
    target_data: &CycleMatrix,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    registry: &VariantRegistry,
) -> Result<Vec<EvalReport>> {
    cfg.validate()?;
    let per_seed: Vec<Vec<EvalReport>> = seeds
        .par_iter()
        .map(|&seed| {
            let (src_cfg, _) = cfg.seeded(seed);
            let t0 = Instant::now();
            let (source, _) = crate::rscn::train_source(source_data, &src_cfg)?;
            let source_time = t0.elapsed().as_secs_f64();
            registry
                .iter()
                .map(|v| Ok(run_variant_with_source(&source, source_time, target_data, cfg, v, seed)?.report))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SynthConfig};

    fn small_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.source.l_max = 15;
        cfg.source.t_max = 10;
        cfg.transfer.grow.l_max = 10;
        cfg.transfer.grow.t_max = 10;
        cfg
    }

    #[test]
    fn ablation_shape_and_determinism() {
        let (s, t) = synth_generate(&SynthConfig {
            n_cycles: 60,
            d: 12,
            ..SynthConfig::default()
        })
        .unwrap();
        let cfg = small_cfg();
        let reg = VariantRegistry::standard();
        let a = run_ablation(&s, &t, &cfg, &[1, 2], &reg).unwrap();
        assert_eq!(a.len(), 8);
        let names: Vec<&str> = a[..4].iter().map(|r| r.variant.as_str()).collect();
        assert_eq!(names, ["baseline", "structural_risk", "no_manifold", "full"]);
        let b = run_ablation(&s, &t, &cfg, &[1, 2], &reg).unwrap();
        let strip = |v: &[EvalReport]| v.iter().map(EvalReport::without_timings).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        let full = run_variant(&s, &t, &cfg, &FullCitl, 2).unwrap();
        assert_eq!(full.report.node_count, full.model.node_count());
        assert_eq!(full.report.without_timings(), a[7].without_timings());
    }

    #[test]
    fn median_of_five() {
        assert_eq!(median(vec![5.0, 1.0, 3.0, 2.0, 4.0]), 3.0);
    }
}
