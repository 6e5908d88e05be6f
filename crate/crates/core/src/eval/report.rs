use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const REPORT_HEADER: &str = "task,seed,variant,rmse_pct,r2,train_time_s,predict_time_ms,node_count";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task_name: String,
    pub variant: String,
    pub seed: u64,
    /// RMSE in SOH percentage points.
    pub rmse_pct: f64,
    pub r2: f64,
    pub train_time_s: f64,
    /// Median of five timed prediction passes.
    pub predict_time_ms: f64,
    pub node_count: usize,
}

impl EvalReport {
    /// Copy with both timing fields zeroed, for byte-level comparisons.
    pub fn without_timings(&self) -> EvalReport {
        EvalReport {
            train_time_s: 0.0,
            predict_time_ms: 0.0,
            ..self.clone()
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.task_name,
            self.seed,
            self.variant,
            self.rmse_pct,
            self.r2,
            self.train_time_s,
            self.predict_time_ms,
            self.node_count
        )
    }
}

pub fn write_reports_csv<W: Write>(reports: &[EvalReport], mut w: W) -> Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in reports {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let mut buf = Vec::new();
    write_reports_csv(reports, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("report rows are UTF-8")
}

/// Fixed-width table for terminal output.
pub fn pretty_table(reports: &[EvalReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:>6} {:<16} {:>9} {:>8} {:>9} {:>11} {:>5}",
        "task", "seed", "variant", "RMSE(%)", "R2", "train(s)", "predict(ms)", "L"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<16} {:>6} {:<16} {:>9.4} {:>8.4} {:>9.3} {:>11.3} {:>5}",
            r.task_name, r.seed, r.variant, r.rmse_pct, r.r2, r.train_time_s, r.predict_time_ms, r.node_count
        );
    }
    s
}
