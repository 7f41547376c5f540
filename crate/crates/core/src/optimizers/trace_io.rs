//! CSV serialization of run traces and iterate sequences.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::RunTrace;
use crate::error::{Error, Result};

/// One CSV row. Row `k = 0` describes the starting point; diagnostic
/// columns are empty where a step produced none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub f: f64,
    pub grad_norm: f64,
    #[serde(rename = "M_eff")]
    pub m_eff: Option<f64>,
    #[serde(rename = "delta_M")]
    pub delta_m: Option<f64>,
    pub rho: Option<f64>,
    pub c_k: Option<f64>,
    pub gain_delta: Option<f64>,
    pub consistency_sum: Option<f64>,
    pub wall_nanos: Option<u64>,
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

impl RunTrace {
    /// CSV rows, including the `k = 0` row for the starting point.
    pub fn rows(&self, include_timing: bool) -> Vec<TraceRow> {
        trace_rows(self, include_timing)
    }
}

fn trace_rows(trace: &RunTrace, include_timing: bool) -> Vec<TraceRow> {
    let mut rows = Vec::with_capacity(trace.records.len() + 1);
    rows.push(TraceRow {
        k: 0,
        f: trace.initial_value,
        grad_norm: trace.initial_grad_norm,
        m_eff: None,
        delta_m: None,
        rho: None,
        c_k: None,
        gain_delta: None,
        consistency_sum: None,
        wall_nanos: include_timing.then_some(0),
    });
    for rec in &trace.records {
        let d = rec.diagnostics;
        rows.push(TraceRow {
            k: rec.k,
            f: rec.f_value,
            grad_norm: rec.grad_norm,
            m_eff: d.map(|d| d.effective_mass),
            delta_m: d.map(|d| d.delta_mass),
            rho: d.map(|d| d.guard_rho),
            c_k: d.map(|d| d.damping),
            gain_delta: d.map(|d| d.gain),
            consistency_sum: d.map(|d| d.consistency_sum),
            wall_nanos: include_timing.then_some(rec.wall_nanos),
        });
    }
    rows
}

/// Write the trace with a header row. Timing is left empty unless requested so
/// that repeated runs produce identical files.
pub fn write_trace_csv(path: &Path, trace: &RunTrace, include_timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in trace_rows(trace, include_timing) {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let rows: Vec<TraceRow> = r
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err(path))?;
    if rows.is_empty() {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            reason: "no data rows".into(),
        });
    }
    Ok(rows)
}

/// Columns `k, x0, x1, ...`; row `k` holds the `k`-th iterate.
pub fn write_iterates_csv(path: &Path, iterates: &[DVector<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let n = iterates.first().map_or(0, |x| x.len());
    let mut header = vec!["k".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    w.write_record(&header).map_err(csv_err(path))?;
    for (k, x) in iterates.iter().enumerate() {
        let mut record = vec![k.to_string()];
        // Debug formatting of f64 is the shortest round-trip form.
        record.extend(x.iter().map(|v| format!("{v:?}")));
        w.write_record(&record).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_iterates_csv(path: &Path) -> Result<Vec<DVector<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let malformed = |reason: String| Error::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let values = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| malformed(format!("row {}: {e}", line + 1)))?;
        out.push(DVector::from_vec(values));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{run, Method, OptimizerConfig};
    use crate::problems::Quadratic;

    #[test]
    fn trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let q = Quadratic::uniform_spectrum(5, 20.0).unwrap();
        let cfg = OptimizerConfig::new(Method::Egaa, 0.05).with_max_iters(30);
        let trace = run(&q, &cfg, &DVector::from_element(5, 1.0)).unwrap();
        write_trace_csv(&path, &trace, false).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("k,f,grad_norm,M_eff,delta_M,rho,c_k,gain_delta,consistency_sum,wall_nanos\n"));
        let rows = read_trace_csv(&path).unwrap();
        assert_eq!(rows, trace_rows(&trace, false));
    }

    #[test]
    fn iterates_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let xs = vec![
            DVector::from_vec(vec![0.1, -1e-300]),
            DVector::from_vec(vec![1.0 / 3.0, 2.5e17]),
        ];
        write_iterates_csv(&path, &xs).unwrap();
        assert_eq!(read_iterates_csv(&path).unwrap(), xs);
    }
}
