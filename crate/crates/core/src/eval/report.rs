//! Long-format CSV tables for each report.

use std::path::Path;

use super::metrics::MetricReport;
use super::profiles::ProfileGrid;
use super::ranef::RanefReport;
use super::sweep::SweepResult;
use super::tune::TuneResult;
use crate::error::{Error, Result};

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn metrics_rows(report: &MetricReport) -> Vec<Vec<String>> {
    report
        .rows()
        .iter()
        .map(|(k, v)| vec![k.to_string(), v.to_string()])
        .collect()
}

pub fn write_metrics(path: &Path, report: &MetricReport) -> Result<()> {
    write_table(path, &["metric", "value"], &metrics_rows(report))
}

pub fn write_sweep(path: &Path, result: &SweepResult) -> Result<()> {
    let mut cells: Vec<_> = result.cells.iter().collect();
    cells.sort_by_key(|c| (c.model, c.tuning, c.month));
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.model.label().to_string(),
                c.tuning.label().to_string(),
                c.month.to_string(),
                fmt(c.auc),
                if c.auc.is_some() { "ok" } else { "failed" }.to_string(),
            ]
        })
        .collect();
    write_table(path, &["model", "tuning", "month", "auc", "status"], &rows)
}

pub fn write_ranef(path: &Path, report: &RanefReport) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .schools
        .iter()
        .map(|s| {
            vec![
                s.school_id.clone(),
                s.quintile.to_string(),
                s.mean.to_string(),
                s.sd.to_string(),
                s.flag.label().to_string(),
            ]
        })
        .collect();
    write_table(path, &["school_id", "quintile", "mean", "sd", "flag"], &rows)
}

pub fn write_profiles(path: &Path, grid: &ProfileGrid) -> Result<()> {
    let rows: Vec<Vec<String>> = grid
        .rows
        .iter()
        .map(|r| {
            vec![
                r.usage.label().to_string(),
                r.quintile.to_string(),
                r.probability.to_string(),
                r.lower.to_string(),
                r.upper.to_string(),
            ]
        })
        .collect();
    write_table(path, &["usage", "quintile", "probability", "lower", "upper"], &rows)
}

pub fn write_trace(path: &Path, result: &TuneResult) -> Result<()> {
    let rows = result
        .trace
        .iter()
        .map(|t| {
            Ok(vec![
                t.index.to_string(),
                fmt(t.auc),
                t.error.clone().unwrap_or_default(),
                serde_json::to_string(&t.config)?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    write_table(path, &["trial", "auc", "error", "config"], &rows)
}
