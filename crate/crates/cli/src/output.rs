//! results.csv and summary.json writers.

use crate::CliError;
use serde::Serialize;
use std::path::Path;

/// Decimal notation with 12 significant digits; `inf`/`-inf`/`nan` for non-finite values.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let e = x.abs().log10().floor() as i32;
    let decimals = (11 - e).max(0) as usize;
    format!("{x:.decimals$}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub method: String,
    pub beta: f64,
    /// Replication, window, or rebalance count depending on the command.
    pub rep: usize,
    pub value: Option<f64>,
    pub status: String,
}

pub fn write_results(dir: &Path, rows: &[Row]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(e.to_string());
    let mut w = csv::Writer::from_path(dir.join("results.csv")).map_err(io)?;
    w.write_record(["method", "beta", "rep", "value", "status"]).map_err(io)?;
    for r in rows {
        let value = r.value.map(fmt_sig).unwrap_or_default();
        w.write_record([r.method.as_str(), &fmt_sig(r.beta), &r.rep.to_string(), &value, &r.status])
            .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_summary<T: Serialize>(dir: &Path, summary: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(dir.join("summary.json"), text + "\n").map_err(|e| CliError::Io(e.to_string()))
}
