//! Report files and trend statistics.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use super::sweep::{AveragedRow, SweepReport, SweepRow};
use crate::error::{invalid, Error, Result};
use crate::mechanisms::MechanismKind;
use crate::stats::{spearman, Correlation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// One line per row.
    Csv,
    /// One line per repeat-averaged point.
    SummaryCsv,
    /// The full report.
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "summary" | "summary-csv" => Ok(Self::SummaryCsv),
            "json" => Ok(Self::Json),
            other => Err(invalid(format!("unknown report format {other:?}"))),
        }
    }
}

const ROW_HEADER: [&str; 11] = [
    "mechanism",
    "epsilon",
    "scale",
    "delta",
    "sensitivity_norm",
    "sensitivity",
    "repeat",
    "accuracy",
    "utility_loss",
    "mia_accuracy",
    "gaussian_outside_calibration",
];

const SUMMARY_HEADER: [&str; 8] = [
    "mechanism",
    "epsilon",
    "scale",
    "repeats",
    "utility_loss",
    "utility_loss_sd",
    "mia_accuracy",
    "mia_accuracy_sd",
];

pub fn write_rows_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ROW_HEADER)?;
    for r in rows {
        w.write_record([
            r.mechanism.name().to_string(),
            r.epsilon.to_string(),
            r.scale.to_string(),
            r.delta.to_string(),
            r.sensitivity_norm.name().to_string(),
            r.sensitivity.to_string(),
            r.repeat.to_string(),
            r.accuracy.to_string(),
            r.utility_loss.to_string(),
            r.mia_accuracy.to_string(),
            r.gaussian_outside_calibration.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(rows: &[AveragedRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.mechanism.name().to_string(),
            r.epsilon.to_string(),
            r.scale.to_string(),
            r.repeats.to_string(),
            r.utility_loss.to_string(),
            r.utility_loss_sd.to_string(),
            r.mia_accuracy.to_string(),
            r.mia_accuracy_sd.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report<W: Write>(report: &SweepReport, format: ReportFormat, mut writer: W) -> Result<()> {
    match format {
        ReportFormat::Csv => write_rows_csv(&report.rows, writer),
        ReportFormat::SummaryCsv => write_summary_csv(&report.averaged, writer),
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut writer, report)?;
            writer.write_all(b"\n")?;
            writer.flush()?;
            Ok(())
        }
    }
}

/// Writes `report` to `path` in `format`.
pub fn emit_report(report: &SweepReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    write_report(report, format, BufWriter::new(File::create(path)?))
}

/// Reads a report written in JSON format.
pub fn load_report(path: impl AsRef<Path>) -> Result<SweepReport> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Rank correlations of ε against repeat-averaged utility loss and attack
/// accuracy for one mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismTrend {
    pub mechanism: MechanismKind,
    pub points: usize,
    pub eps_vs_utility: Correlation,
    pub eps_vs_mia: Correlation,
}

/// Trend statistics for every mechanism in the report, in report order.
/// Each mechanism needs at least three distinct ε values.
pub fn trend_statistics(report: &SweepReport) -> Result<Vec<MechanismTrend>> {
    let mut kinds: Vec<MechanismKind> = report.averaged.iter().map(|r| r.mechanism).collect();
    kinds.dedup();
    kinds
        .into_iter()
        .map(|kind| {
            let rows = report.averaged_for(kind);
            let mut eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
            eps.sort_by(f64::total_cmp);
            eps.dedup();
            if eps.len() < 3 {
                return Err(invalid(format!("{kind} has {} distinct ε values; 3 are needed", eps.len())));
            }
            let x: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
            let u: Vec<f64> = rows.iter().map(|r| r.utility_loss).collect();
            let m: Vec<f64> = rows.iter().map(|r| r.mia_accuracy).collect();
            Ok(MechanismTrend { mechanism: kind, points: rows.len(), eps_vs_utility: spearman(&x, &u)?, eps_vs_mia: spearman(&x, &m)? })
        })
        .collect()
}
