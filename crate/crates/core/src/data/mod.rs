//! Cycle data: raw discharge traces, fixed-length feature matrices,
//! SOH labels, normalization and the labeled/unlabeled/test split.

mod csv_io;
mod synth;

pub use csv_io::{read_canonical_csv, FeatureTable, read_feature_csv, read_raw_traces, write_canonical_csv};
pub use synth::{synth_generate, SynthConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Feature dimension used unless a dataset says otherwise.
pub const DEFAULT_DIM: usize = 102;

/// Floor applied to per-feature standard deviations.
pub const STD_FLOOR: f64 = 1e-12;

/// One discharge segment as recorded by the cycler.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCycleTrace {
    pub cycle_id: u64,
    /// `(time_s, voltage_V)` pairs in recording order.
    pub samples: Vec<(f64, f64)>,
    pub discharge_capacity_ah: f64,
}

impl RawCycleTrace {
    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < 2 {
            return Err(Error::TooFewSamples {
                cycle_id: self.cycle_id,
            });
        }
        let invalid = |reason: &str| Error::InvalidTrace {
            cycle_id: self.cycle_id,
            reason: reason.to_string(),
        };
        for w in self.samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(invalid("time is not strictly increasing"));
            }
        }
        if self
            .samples
            .iter()
            .any(|&(t, v)| !t.is_finite() || !v.is_finite() || v <= 0.0)
        {
            return Err(invalid("non-finite time or non-positive voltage"));
        }
        if !(self.discharge_capacity_ah > 0.0) {
            return Err(Error::NonPositiveCapacity(self.discharge_capacity_ah));
        }
        Ok(())
    }
}

/// Per-cycle feature rows with SOH labels, ordered by cycle id.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleMatrix {
    pub x: Matrix,
    pub soh: Vec<f64>,
    pub cycle_ids: Vec<u64>,
}

impl CycleMatrix {
    pub fn new(x: Matrix, soh: Vec<f64>, cycle_ids: Vec<u64>) -> Result<Self> {
        if x.rows() != soh.len() || x.rows() != cycle_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows, {} labels, {} cycle ids",
                x.rows(),
                soh.len(),
                cycle_ids.len()
            )));
        }
        if !x.is_finite() || soh.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("cycle matrix"));
        }
        if cycle_ids.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parse("cycle ids must be strictly ascending".into()));
        }
        Ok(CycleMatrix { x, soh, cycle_ids })
    }

    pub fn len(&self) -> usize {
        self.soh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.soh.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Labels as an N×1 target matrix.
    pub fn targets(&self) -> Matrix {
        Matrix::column_vector(&self.soh)
    }

    fn slice(&self, range: std::ops::Range<usize>) -> CycleMatrix {
        CycleMatrix {
            x: self.x.select_rows(range.clone()),
            soh: self.soh[range.clone()].to_vec(),
            cycle_ids: self.cycle_ids[range].to_vec(),
        }
    }

    pub fn normalized(&self, stats: &NormStats) -> Result<CycleMatrix> {
        Ok(CycleMatrix {
            x: apply_norm(&self.x, stats)?,
            soh: self.soh.clone(),
            cycle_ids: self.cycle_ids.clone(),
        })
    }
}

/// Target cycles whose labels are withheld from training. There is no
/// label field, so nothing downstream can read one.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledSet {
    pub x: Matrix,
    pub cycle_ids: Vec<u64>,
}

impl UnlabeledSet {
    pub fn len(&self) -> usize {
        self.cycle_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycle_ids.is_empty()
    }

    pub fn normalized(&self, stats: &NormStats) -> Result<UnlabeledSet> {
        Ok(UnlabeledSet {
            x: apply_norm(&self.x, stats)?,
            cycle_ids: self.cycle_ids.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Identity transform for `d` features.
    pub fn identity(d: usize) -> Self {
        NormStats {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Inverse of [`apply_norm`] for a single row.
    pub fn denormalize_row(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| m + s * z)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub labeled_count: usize,
    pub semisup_unlabeled_count: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            labeled_count: 20,
            semisup_unlabeled_count: 20,
        }
    }
}

/// Labeled training block, unlabeled training block and the full test set.
#[derive(Debug, Clone)]
pub struct TargetSplit {
    pub labeled: CycleMatrix,
    pub unlabeled: UnlabeledSet,
    pub test: CycleMatrix,
}

/// Linearly interpolates the voltage curve onto `d` equispaced points of
/// normalized time, endpoints included.
pub fn resample_cycle(trace: &RawCycleTrace, d: usize) -> Result<Vec<f64>> {
    if d < 2 {
        return Err(Error::InvalidConfig(format!("resample dimension {d} < 2")));
    }
    trace.validate()?;
    let s = &trace.samples;
    let t0 = s[0].0;
    let span = s[s.len() - 1].0 - t0;
    let tau: Vec<f64> = s.iter().map(|&(t, _)| (t - t0) / span).collect();
    let out = (0..d)
        .map(|k| {
            let target = k as f64 / (d - 1) as f64;
            // first sample strictly beyond target, clamped to keep a valid segment
            let hi = tau.partition_point(|&t| t <= target).clamp(1, s.len() - 1);
            let lo = hi - 1;
            let w = (target - tau[lo]) / (tau[hi] - tau[lo]);
            s[lo].1 + w * (s[hi].1 - s[lo].1)
        })
        .collect();
    Ok(out)
}

/// SOH as capacity over the reference capacity.
pub fn compute_soh(capacities: &[f64], q_ref: f64) -> Result<Vec<f64>> {
    if !(q_ref > 0.0) {
        return Err(Error::NonPositiveCapacity(q_ref));
    }
    capacities
        .iter()
        .map(|&q| {
            if q > 0.0 {
                Ok(q / q_ref)
            } else {
                Err(Error::NonPositiveCapacity(q))
            }
        })
        .collect()
}

/// Assembles a [`CycleMatrix`] from raw traces. The reference capacity is
/// the first (lowest-id) cycle's.
pub fn cycles_from_traces(traces: &[RawCycleTrace], d: usize) -> Result<CycleMatrix> {
    if traces.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut sorted: Vec<&RawCycleTrace> = traces.iter().collect();
    sorted.sort_by_key(|t| t.cycle_id);
    let rows = sorted
        .iter()
        .map(|t| resample_cycle(t, d))
        .collect::<Result<Vec<_>>>()?;
    let caps: Vec<f64> = sorted.iter().map(|t| t.discharge_capacity_ah).collect();
    let soh = compute_soh(&caps, caps[0])?;
    CycleMatrix::new(
        Matrix::from_rows(&rows)?,
        soh,
        sorted.iter().map(|t| t.cycle_id).collect(),
    )
}

pub fn fit_norm(x: &Matrix) -> Result<NormStats> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::DegenerateInput(format!("{n} rows, need at least 2")));
    }
    let d = x.cols();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for i in 0..n {
        for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var
        .into_iter()
        .map(|s| (s / n as f64).sqrt().max(STD_FLOOR))
        .collect();
    Ok(NormStats { mean, std })
}

pub fn apply_norm(x: &Matrix, stats: &NormStats) -> Result<Matrix> {
    if x.cols() != stats.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} features, normalization fitted on {}",
            x.cols(),
            stats.dim()
        )));
    }
    let mut out = x.clone();
    for i in 0..out.rows() {
        for ((v, m), s) in out.row_mut(i).iter_mut().zip(&stats.mean).zip(&stats.std) {
            *v = (*v - m) / s;
        }
    }
    Ok(out)
}

/// First `labeled_count` cycles keep their labels, the next
/// `semisup_unlabeled_count` lose them, and every cycle is a test cycle.
pub fn split_protocol(data: &CycleMatrix, spec: SplitSpec) -> Result<TargetSplit> {
    if spec.labeled_count == 0 || spec.semisup_unlabeled_count == 0 {
        return Err(Error::InvalidConfig(
            "labeled and unlabeled counts must be at least 1".into(),
        ));
    }
    let needed = spec.labeled_count + spec.semisup_unlabeled_count;
    if data.len() < needed {
        return Err(Error::InsufficientCycles {
            needed,
            available: data.len(),
        });
    }
    let labeled = data.slice(0..spec.labeled_count);
    let unl = data.slice(spec.labeled_count..needed);
    Ok(TargetSplit {
        labeled,
        unlabeled: UnlabeledSet {
            x: unl.x,
            cycle_ids: unl.cycle_ids,
        },
        test: data.clone(),
    })
}
