//! Report serialization: JSON (canonical key order), flat CSV (one row per
//! significance level) and a human-readable text table.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{CalibrationReport, EvaluationReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub proper_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
    pub n_proper: usize,
    pub n_calibration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub measure: String,
    pub mondrian: bool,
    pub split: Option<SplitSummary>,
    pub calibration: CalibrationReport,
    pub evaluations: Vec<EvaluationReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

pub fn parse_report_json(bytes: &[u8]) -> Result<PipelineReport> {
    serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })
}

pub fn emit_report(report: &PipelineReport, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
            out.push(b'\n');
            out
        }
        Format::Csv => emit_csv(report).into_bytes(),
        Format::Text => emit_text(report).into_bytes(),
    }
}

pub const CSV_COLUMNS: [&str; 29] = [
    "epsilon",
    "confidence",
    "n",
    "validity",
    "efficiency",
    "frac_correct_single",
    "frac_false_single",
    "frac_both",
    "frac_empty",
    "n_correct_single",
    "n_false_single",
    "n_both",
    "n_empty",
    "scored_accuracy_both_correct",
    "scored_accuracy_both_wrong",
    "accuracy",
    "sensitivity",
    "specificity",
    "auroc",
    "singleton_n",
    "singleton_false_positives",
    "singleton_accuracy",
    "singleton_sensitivity",
    "singleton_specificity",
    "singleton_auroc",
    "calibration_n",
    "calibration_auroc",
    "calibration_accuracy",
    "mondrian",
];

/// Shortest round-trip decimal, padded to at least two fractional digits.
fn num(v: f64) -> String {
    let mut s = v.to_string();
    if !v.is_finite() {
        return s;
    }
    match s.find('.') {
        None => s.push_str(".00"),
        Some(dot) if s.len() - dot == 2 => s.push('0'),
        Some(_) => {}
    }
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_row(e: Option<&EvaluationReport>, report: &PipelineReport) -> Vec<String> {
    let mut row: Vec<String> = match e {
        Some(e) => vec![
            num(e.epsilon),
            num(e.confidence),
            e.n.to_string(),
            num(e.validity),
            num(e.efficiency),
            num(e.distribution.frac_correct_single),
            num(e.distribution.frac_false_single),
            num(e.distribution.frac_both),
            num(e.distribution.frac_empty),
            e.counts.correct_single.to_string(),
            e.counts.false_single.to_string(),
            e.counts.both.to_string(),
            e.counts.empty.to_string(),
            num(e.scored_accuracy_both_correct),
            num(e.scored_accuracy_both_wrong),
            opt(e.binary.accuracy),
            opt(e.binary.sensitivity),
            opt(e.binary.specificity),
            opt(e.binary.auroc),
            e.singleton_conditional.n_singleton.to_string(),
            e.singleton_conditional.false_positives_in_singletons.to_string(),
            opt(e.singleton_conditional.accuracy),
            opt(e.singleton_conditional.sensitivity),
            opt(e.singleton_conditional.specificity),
            opt(e.singleton_conditional.auroc),
        ],
        None => vec![String::new(); 25],
    };
    row.extend([
        report.calibration.n.to_string(),
        opt(report.calibration.auroc),
        opt(report.calibration.accuracy),
        report.mondrian.to_string(),
    ]);
    row
}

fn emit_csv(report: &PipelineReport) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    let rows: Vec<Vec<String>> = if report.evaluations.is_empty() {
        vec![csv_row(None, report)]
    } else {
        report.evaluations.iter().map(|e| csv_row(Some(e), report)).collect()
    };
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt4).unwrap_or_else(|| "n/a".to_string())
}

fn emit_text(report: &PipelineReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "measure: {}  taxonomy: {}",
        report.measure,
        if report.mondrian { "mondrian" } else { "pooled" }
    );
    if let Some(sp) = &report.split {
        let _ = writeln!(
            s,
            "split: fraction {} seed {}{}  proper {}  calibration {}",
            sp.proper_fraction,
            sp.seed,
            if sp.stratified { " stratified" } else { "" },
            sp.n_proper,
            sp.n_calibration
        );
    }
    let c = &report.calibration;
    let _ = writeln!(
        s,
        "calibration set: n {}  auroc {}  accuracy@0.5 {}",
        c.n,
        fmt_opt(c.auroc),
        fmt_opt(c.accuracy)
    );
    if report.evaluations.is_empty() {
        let _ = writeln!(s, "no labelled test set: nothing to evaluate");
        return s;
    }
    let _ = writeln!(
        s,
        "\n{:>8} {:>8} {:>6} {:>8} {:>10} {:>8} {:>8} {:>8} {:>8} {:>9} {:>9} {:>8} {:>8} {:>8} {:>8} {:>6} {:>4} {:>8}",
        "epsilon", "conf%", "n", "validity", "efficiency", "correct", "false", "both", "empty",
        "acc(b=ok)", "acc(b=no)", "acc", "sens", "spec", "auroc", "n_sgl", "fp", "sgl_acc"
    );
    for e in &report.evaluations {
        let d = &e.distribution;
        let sc = &e.singleton_conditional;
        let _ = writeln!(
            s,
            "{:>8} {:>8} {:>6} {:>8} {:>10} {:>8} {:>8} {:>8} {:>8} {:>9} {:>9} {:>8} {:>8} {:>8} {:>8} {:>6} {:>4} {:>8}",
            fmt4(e.epsilon),
            format!("{:.2}", e.confidence),
            e.n,
            fmt4(e.validity),
            fmt4(e.efficiency),
            fmt4(d.frac_correct_single),
            fmt4(d.frac_false_single),
            fmt4(d.frac_both),
            fmt4(d.frac_empty),
            fmt4(e.scored_accuracy_both_correct),
            fmt4(e.scored_accuracy_both_wrong),
            fmt_opt(e.binary.accuracy),
            fmt_opt(e.binary.sensitivity),
            fmt_opt(e.binary.specificity),
            fmt_opt(e.binary.auroc),
            sc.n_singleton,
            sc.false_positives_in_singletons,
            fmt_opt(sc.accuracy),
        );
    }
    s
}
