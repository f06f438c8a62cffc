use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::bounds::RdReport;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidArgument(format!("unknown report format {other:?}"))),
        }
    }
}

pub const CSV_HEADER: [&str; 7] = ["layer", "d_in", "d_out", "r_eff", "d_eff", "scale_a", "lambda_max"];

/// JSON: the whole report. CSV: one row per layer, then a `Total` row holding
/// the summed effective rank, the total Riemannian Dimension in the `d_eff`
/// column, and the largest `lambda_max`. A report without layers is
/// header-only.
pub fn write_report_to<W: Write>(out: W, report: &RdReport, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, report)?;
            writeln!(out)?;
            out.flush()?;
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER)?;
            for t in &report.per_layer {
                w.write_record([
                    t.layer.to_string(),
                    t.d_in.to_string(),
                    t.d_out.to_string(),
                    t.r_eff.to_string(),
                    t.d_eff.to_string(),
                    t.scale_a.to_string(),
                    t.lambda_max.to_string(),
                ])?;
            }
            if !report.per_layer.is_empty() {
                let r_sum: usize = report.per_layer.iter().map(|t| t.r_eff).sum();
                let lam = report.per_layer.iter().map(|t| t.lambda_max).fold(0.0, f64::max);
                w.write_record([
                    "Total".to_string(),
                    String::new(),
                    String::new(),
                    r_sum.to_string(),
                    report.d_r_total.to_string(),
                    String::new(),
                    lam.to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn write_report(path: impl AsRef<Path>, report: &RdReport, format: ReportFormat) -> Result<()> {
    let file = File::create(path)?;
    write_report_to(BufWriter::new(file), report, format)
}
