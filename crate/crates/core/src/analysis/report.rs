//! Tabular report files.
//!
//! A report is a header plus rows under named columns. The CSV form puts the
//! header on leading `#` lines:
//!
//! ```text
//! # tool: tmn
//! # version: 0.1.0
//! # report: mse
//! # seed: 7
//! # config: {"n_samples":100000,...}
//! coding,horizon,precharge,samples,mse
//! css,2,0,100000,0.0123
//! ```
//!
//! The JSON form is `{"header": {...}, "columns": [...], "rows": [[...]]}`.
//! Both are byte-stable for a fixed header and fixed rows.

use serde::Serialize;
use serde_json::{json, Value};

use super::ablation::AblationRow;
use super::energy::EnergyReport;
use super::mse::{LayerMseRow, MseRow, RoundTripSummary};
use super::theory::ResidualStats;
use crate::conversion::Coding;

pub const TOOL: &str = "tmn";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportHeader {
    pub tool: String,
    pub version: String,
    pub report: String,
    pub seed: u64,
    /// Fully resolved configuration that produced the report.
    pub config: Value,
}

impl ReportHeader {
    pub fn new(report: &str, seed: u64, config: Value) -> Self {
        ReportHeader {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            report: report.to_string(),
            seed,
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub header: ReportHeader,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl AnalysisReport {
    pub fn new(header: ReportHeader, columns: &[&str]) -> Self {
        AnalysisReport {
            header,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row; panics if its width differs from the column count.
    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values serialize") + "\n"
    }

    pub fn to_csv(&self) -> String {
        let h = &self.header;
        let mut out = format!(
            "# tool: {}\n# version: {}\n# report: {}\n# seed: {}\n# config: {}\n",
            h.tool, h.version, h.report, h.seed, h.config
        );
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(csv_cell).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) if s.contains([',', '"', '\n']) => {
            format!("\"{}\"", s.replace('"', "\"\""))
        }
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn coding_name(c: Coding) -> &'static str {
    match c {
        Coding::Css => "css",
        Coding::Rate => "rate",
    }
}

pub fn mse_report(header: ReportHeader, rows: &[MseRow]) -> AnalysisReport {
    let mut r = AnalysisReport::new(
        header,
        &["coding", "horizon", "precharge", "samples", "mse"],
    );
    for m in rows {
        r.push(vec![
            json!(coding_name(m.coding)),
            json!(m.horizon),
            json!(m.precharge),
            json!(m.samples),
            json!(m.mse),
        ]);
    }
    r
}

pub fn layer_mse_report(header: ReportHeader, rows: &[LayerMseRow]) -> AnalysisReport {
    let mut r = AnalysisReport::new(
        header,
        &[
            "relu_layer",
            "coding",
            "horizon",
            "precharge",
            "v_th",
            "values",
            "mse",
            "bound",
        ],
    );
    for m in rows {
        r.push(vec![
            json!(m.relu_layer),
            json!(coding_name(m.coding)),
            json!(m.horizon),
            json!(m.precharge),
            json!(m.v_th),
            json!(m.values),
            json!(m.mse),
            json!(m.bound),
        ]);
    }
    r
}

/// Per-step moments; the last step of each `α` also carries the standard error.
pub fn residual_summary_report(header: ReportHeader, stats: &[ResidualStats]) -> AnalysisReport {
    let mut r = AnalysisReport::new(header, &["alpha", "step", "n", "mean", "mean_sq", "stderr"]);
    for s in stats {
        let last = s.per_step.len();
        for m in &s.per_step {
            r.push(vec![
                json!(s.alpha),
                json!(m.step),
                json!(s.n),
                json!(m.mean),
                json!(m.mean_sq),
                if m.step == last {
                    json!(s.stderr)
                } else {
                    Value::Null
                },
            ]);
        }
    }
    r
}

pub fn residual_histogram_report(header: ReportHeader, stats: &[ResidualStats]) -> AnalysisReport {
    let mut r = AnalysisReport::new(header, &["alpha", "bin", "lo", "hi", "count"]);
    for s in stats {
        for (i, &c) in s.histogram.counts.iter().enumerate() {
            let (lo, hi) = s.histogram.bin_edges(i);
            r.push(vec![
                json!(s.alpha),
                json!(i),
                json!(lo),
                json!(hi),
                json!(c),
            ]);
        }
    }
    r
}

pub fn round_trip_report(header: ReportHeader, rows: &[RoundTripSummary]) -> AnalysisReport {
    let mut r = AnalysisReport::new(
        header,
        &[
            "horizon",
            "precharge",
            "points",
            "within",
            "fraction",
            "bound",
            "max_error",
            "worst_u_hat",
        ],
    );
    for s in rows {
        let worst = s.exceptions.iter().map(|e| e.max_u_hat).fold(0.0, f64::max);
        r.push(vec![
            json!(s.horizon),
            json!(s.precharge),
            json!(s.points),
            json!(s.within),
            json!(s.fraction_within()),
            json!(s.bound),
            json!(s.max_error),
            json!(worst),
        ]);
    }
    r
}

pub fn ablation_report(header: ReportHeader, rows: &[AblationRow]) -> AnalysisReport {
    let mut r = AnalysisReport::new(
        header,
        &[
            "horizon",
            "precharge",
            "tps",
            "alpha",
            "accuracy",
            "agreement",
            "ac_count",
            "mac_count",
        ],
    );
    for a in rows {
        r.push(vec![
            json!(a.horizon),
            json!(a.precharge),
            json!(a.tps),
            json!(a.alpha),
            json!(a.accuracy),
            json!(a.agreement),
            json!(a.ac_count),
            json!(a.mac_count),
        ]);
    }
    r
}

/// One row per labeled energy report.
pub fn energy_report(header: ReportHeader, rows: &[(String, EnergyReport)]) -> AnalysisReport {
    let mut r = AnalysisReport::new(
        header,
        &[
            "label",
            "ac_count",
            "mac_count",
            "e_ac",
            "e_mac",
            "total_pj",
        ],
    );
    for (label, e) in rows {
        r.push(vec![
            json!(label),
            json!(e.ac_count),
            json!(e.mac_count),
            json!(e.e_ac),
            json!(e.e_mac),
            json!(e.total),
        ]);
    }
    r
}
