//! Report formats: checkpoint CSV rows and the JSON verification report.

use std::collections::BTreeMap;
use std::io::Write;

use binorbit_core::checks::{Analysis, CheckReport};
use serde::Serialize;

use crate::error::CliError;
use crate::numfmt::{estimator_cell, interval_cells, log2_text};

pub const CSV_COLUMNS: [&str; 14] = [
    "n",
    "region",
    "j",
    "q",
    "S_lo",
    "S_hi",
    "log2_S_lo",
    "log2_S_hi",
    "A_lo",
    "A_hi",
    "phi",
    "psi",
    "upsilon",
    "lambda",
];

/// One checkpoint of an analysis, already rendered to text cells.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Row {
    pub n: u64,
    pub region: &'static str,
    pub j: u64,
    pub q: u64,
    #[serde(rename = "S_lo")]
    pub s_lo: String,
    #[serde(rename = "S_hi")]
    pub s_hi: String,
    #[serde(rename = "log2_S_lo")]
    pub log2_s_lo: String,
    #[serde(rename = "log2_S_hi")]
    pub log2_s_hi: String,
    #[serde(rename = "A_lo")]
    pub a_lo: String,
    #[serde(rename = "A_hi")]
    pub a_hi: String,
    pub phi: String,
    pub psi: String,
    pub upsilon: String,
    pub lambda: String,
}

pub fn rows(analysis: &Analysis) -> Vec<Row> {
    analysis
        .series
        .points
        .iter()
        .zip(&analysis.trace.entries)
        .map(|(pt, e)| {
            let (s_lo, s_hi) = interval_cells(&pt.sum);
            let (a_lo, a_hi) = interval_cells(&pt.avg);
            Row {
                n: pt.n,
                region: e.region.tag.as_str(),
                j: e.region.j,
                q: e.region.q,
                s_lo,
                s_hi,
                log2_s_lo: log2_text(pt.sum.lo()),
                log2_s_hi: log2_text(pt.sum.hi()),
                a_lo,
                a_hi,
                phi: estimator_cell(&e.phi),
                psi: estimator_cell(&e.psi),
                upsilon: estimator_cell(&e.upsilon),
                lambda: estimator_cell(&e.lambda),
            }
        })
        .collect()
}

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckJson {
    pub name: String,
    pub n_min: u64,
    pub n_max: u64,
    pub checked: u64,
    pub violations: u64,
    pub worst_margin: Option<f64>,
    pub first_violation: Option<u64>,
    pub pass: bool,
    pub metrics: BTreeMap<String, f64>,
}

impl From<&CheckReport> for CheckJson {
    fn from(r: &CheckReport) -> Self {
        CheckJson {
            name: r.name.clone(),
            n_min: r.n_min,
            n_max: r.n_max,
            checked: r.checked,
            violations: r.violations,
            worst_margin: r.worst_margin,
            first_violation: r.first_violation,
            pass: r.pass,
            metrics: r.metrics.iter().map(|m| (m.name.to_string(), m.value)).collect(),
        }
    }
}

/// `{spec, p, n_max, epsilon, checks, pass}`, in that order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub spec: String,
    pub p: String,
    pub n_max: u64,
    pub epsilon: String,
    pub checks: Vec<CheckJson>,
    pub pass: bool,
}

impl Report {
    pub fn new(spec: String, p: String, n_max: u64, epsilon: String, checks: &[CheckReport]) -> Self {
        Report {
            spec,
            p,
            n_max,
            epsilon,
            pass: checks.iter().all(|c| c.pass),
            checks: checks.iter().map(CheckJson::from).collect(),
        }
    }
}

/// Check summaries as CSV, one row per check.
pub fn write_checks_csv<W: Write>(out: W, report: &Report) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "spec",
        "p",
        "name",
        "n_min",
        "n_max",
        "checked",
        "violations",
        "worst_margin",
        "first_violation",
        "pass",
    ])?;
    for c in &report.checks {
        w.write_record([
            report.spec.clone(),
            report.p.clone(),
            c.name.clone(),
            c.n_min.to_string(),
            c.n_max.to_string(),
            c.checked.to_string(),
            c.violations.to_string(),
            c.worst_margin.map(|m| m.to_string()).unwrap_or_default(),
            c.first_violation.map(|n| n.to_string()).unwrap_or_default(),
            c.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}
