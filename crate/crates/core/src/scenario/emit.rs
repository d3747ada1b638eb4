use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::sim::SimTrace;

use super::{RunSummary, ScenarioError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    /// `trace.csv` plus `summary.json`.
    Csv,
    /// `trace.json` plus `summary.json`.
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format {other:?}, expected csv or json")),
        }
    }
}

/// 15 significant digits.
fn num(v: f64) -> String {
    format!("{v:.14e}")
}

/// Writes the trace as CSV:
/// `t,x_1..x_n,xbar_1..xbar_m,rho,neg_rho,V,viol_flag`.
pub fn write_csv<W: Write>(trace: &SimTrace, mut out: W) -> std::io::Result<()> {
    let n = trace.x.first().map_or(0, Vec::len);
    let m = trace.xbar.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=m).map(|k| format!("xbar_{k}")));
    header.extend(["rho", "neg_rho", "V", "viol_flag"].map(String::from));
    writeln!(out, "{}", header.join(","))?;

    let mut row = Vec::with_capacity(n + m + 5);
    for k in 0..trace.len() {
        row.clear();
        row.push(num(trace.times[k]));
        row.extend(trace.x[k].iter().map(|&v| num(v)));
        row.extend(trace.xbar[k].iter().map(|&v| num(v)));
        let rho = trace.rho[k].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.push(num(rho));
        row.push(num(-rho));
        row.push(num(trace.v[k]));
        row.push(if trace.step_violated[k] { "1" } else { "0" }.to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()
}

/// Writes the trace and summary into `dir`, creating it if needed.
pub fn emit(
    trace: &SimTrace,
    summary: &RunSummary,
    format: OutputFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>, ScenarioError> {
    fs::create_dir_all(dir)?;
    let trace_path = match format {
        OutputFormat::Csv => {
            let path = dir.join("trace.csv");
            write_csv(trace, BufWriter::new(File::create(&path)?))?;
            path
        }
        OutputFormat::Json => {
            let path = dir.join("trace.json");
            let w = BufWriter::new(File::create(&path)?);
            serde_json::to_writer(w, trace).map_err(std::io::Error::other)?;
            path
        }
    };
    let summary_path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(summary).map_err(std::io::Error::other)?;
    fs::write(&summary_path, text + "\n")?;
    Ok(vec![trace_path, summary_path])
}
