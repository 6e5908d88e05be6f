use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{CycleMatrix, RawCycleTrace};
use crate::error::{Error, Result};
use crate::numcore::Matrix;

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn parse_f64(field: &str, what: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: bad {what} value {field:?}")))
}

fn parse_id(field: &str, line: usize) -> Result<u64> {
    field
        .trim()
        .parse::<u64>()
        .map_err(|_| Error::Parse(format!("line {line}: bad cycle_id {field:?}")))
}

/// Feature rows read from a canonical or label-free CSV.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub cycle_ids: Vec<u64>,
    pub x: Matrix,
    pub soh: Option<Vec<f64>>,
}

/// Reads `cycle_id[,soh],v_0,...,v_{d-1}`. The `soh` column is optional.
pub fn read_feature_csv<R: Read>(reader: R) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.get(0) != Some("cycle_id") {
        return Err(Error::Parse("first column must be cycle_id".into()));
    }
    let has_soh = headers.get(1) == Some("soh");
    let first_v = if has_soh { 2 } else { 1 };
    let d = headers.len() - first_v;
    if d == 0 {
        return Err(Error::Parse("no voltage columns".into()));
    }
    for (k, h) in headers.iter().skip(first_v).enumerate() {
        if h != format!("v_{k}") {
            return Err(Error::Parse(format!("expected header v_{k}, found {h:?}")));
        }
    }
    let mut ids = Vec::new();
    let mut soh = Vec::new();
    let mut data = Vec::new();
    for (row_no, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = row_no + 2;
        if rec.len() != headers.len() {
            return Err(Error::Parse(format!(
                "line {line}: {} fields, header has {}",
                rec.len(),
                headers.len()
            )));
        }
        ids.push(parse_id(&rec[0], line)?);
        if has_soh {
            soh.push(parse_f64(&rec[1], "soh", line)?);
        }
        for f in rec.iter().skip(first_v) {
            data.push(parse_f64(f, "voltage", line)?);
        }
    }
    let x = Matrix::from_vec(ids.len(), d, data)?;
    if !x.is_finite() {
        return Err(Error::NonFinite("feature csv"));
    }
    Ok(FeatureTable {
        cycle_ids: ids,
        x,
        soh: has_soh.then_some(soh),
    })
}

pub fn read_canonical_csv<R: Read>(reader: R) -> Result<CycleMatrix> {
    let t = read_feature_csv(reader)?;
    let soh = t
        .soh
        .ok_or_else(|| Error::Parse("canonical csv needs a soh column".into()))?;
    CycleMatrix::new(t.x, soh, t.cycle_ids)
}

pub fn write_canonical_csv<W: Write>(data: &CycleMatrix, mut w: W) -> Result<()> {
    let mut header = String::from("cycle_id,soh");
    for k in 0..data.dim() {
        header.push_str(&format!(",v_{k}"));
    }
    writeln!(w, "{header}")?;
    for i in 0..data.len() {
        let mut line = format!("{},{}", data.cycle_ids[i], data.soh[i]);
        for v in data.x.row(i) {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Reads a raw trace file (`cycle_id,time_s,voltage_V`) and its capacity
/// companion (`cycle_id,discharge_capacity_Ah`).
pub fn read_raw_traces<R1: Read, R2: Read>(traces: R1, capacities: R2) -> Result<Vec<RawCycleTrace>> {
    let mut samples: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(traces);
    expect_headers(&mut rdr, &["cycle_id", "time_s", "voltage_V"])?;
    for (row_no, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = row_no + 2;
        let id = parse_id(&rec[0], line)?;
        let t = parse_f64(&rec[1], "time_s", line)?;
        let v = parse_f64(&rec[2], "voltage_V", line)?;
        samples.entry(id).or_default().push((t, v));
    }

    let mut caps: BTreeMap<u64, f64> = BTreeMap::new();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(capacities);
    expect_headers(&mut rdr, &["cycle_id", "discharge_capacity_Ah"])?;
    for (row_no, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = row_no + 2;
        caps.insert(
            parse_id(&rec[0], line)?,
            parse_f64(&rec[1], "discharge_capacity_Ah", line)?,
        );
    }

    samples
        .into_iter()
        .map(|(cycle_id, samples)| {
            let discharge_capacity_ah = *caps
                .get(&cycle_id)
                .ok_or_else(|| Error::Parse(format!("no capacity for cycle {cycle_id}")))?;
            let trace = RawCycleTrace {
                cycle_id,
                samples,
                discharge_capacity_ah,
            };
            trace.validate()?;
            Ok(trace)
        })
        .collect()
}

fn expect_headers<R: Read>(rdr: &mut csv::Reader<R>, want: &[&str]) -> Result<()> {
    let h = rdr.headers().map_err(csv_err)?;
    if h.iter().collect::<Vec<_>>() != want {
        return Err(Error::Parse(format!(
            "expected header {}, found {}",
            want.join(","),
            h.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}
