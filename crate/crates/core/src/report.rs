//! Experiment outcomes, CSV tables, the JSON manifest and plot data.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::fit::FitKind;
use crate::macroscopic::MacroConstants;
use crate::model::Moments;
use crate::modes::DecayReport;

/// One numerical check tied to an acceptance criterion.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub criterion: u8,
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub target: f64,
    pub detail: String,
}

impl Check {
    pub fn new(criterion: u8, name: impl Into<String>, passed: bool, value: f64, target: f64) -> Self {
        Self { criterion, name: name.into(), passed, value, target, detail: String::new() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// A CSV table; cells are preformatted so mixed columns stay exact.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_f64(&mut self, row: &[f64]) {
        self.push(row.iter().map(|x| num(*x)).collect());
    }

    /// Columns as `(t, value…)` rows from equal-length series.
    pub fn from_series(name: impl Into<String>, header: &[&str], t: &[f64], cols: &[&[f64]]) -> Self {
        let mut table = Self::new(name, header);
        for (k, tk) in t.iter().enumerate() {
            let mut row = vec![*tk];
            row.extend(cols.iter().map(|c| c[k]));
            table.push_f64(&row);
        }
        table
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| crate::Error::Io(std::io::Error::other(e.to_string())))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        fs::write(&path, self.to_csv()?)?;
        Ok(path)
    }
}

fn csv_err(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e.to_string()))
}

/// Shortest round-trip decimal form, independent of locale.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn flag(b: bool) -> String {
    if b { "true" } else { "false" }.to_string()
}

/// Result of one experiment: checks, headline values, tables and decay reports.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub experiment: String,
    pub checks: Vec<Check>,
    pub values: BTreeMap<String, f64>,
    pub tables: Vec<Table>,
    #[serde(skip)]
    pub reports: Vec<(String, DecayReport)>,
}

impl Outcome {
    pub fn new(experiment: &str) -> Self {
        Self { experiment: experiment.into(), checks: vec![], values: BTreeMap::new(), tables: vec![], reports: vec![] }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn value(&mut self, key: impl Into<String>, v: f64) {
        self.values.insert(key.into(), v);
    }

    pub fn failing(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Criteria touched by this outcome with their combined status.
    pub fn criteria(&self) -> BTreeMap<u8, bool> {
        let mut out = BTreeMap::new();
        for c in &self.checks {
            *out.entry(c.criterion).or_insert(true) &= c.passed;
        }
        out
    }

    pub fn summary_line(&self) -> String {
        let n = self.checks.len();
        let ok = self.checks.iter().filter(|c| c.passed).count();
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let mut line = format!("{status} {} ({ok}/{n} checks)", self.experiment);
        let failing: Vec<String> = self.failing().map(|c| format!("[{}] {}", c.criterion, c.name)).collect();
        if !failing.is_empty() {
            line.push_str(&format!(": failing {}", failing.join(", ")));
        }
        line
    }
}

/// Constants of one model echoed into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateEcho {
    pub case: String,
    pub d: usize,
    pub moments: Moments,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub macro_constants: MacroConstants,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionStatus {
    pub criterion: u8,
    pub passed: bool,
}

/// `manifest.json`; struct field order and `BTreeMap` keys fix the key order.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: &'a ExperimentConfig,
    pub certificates: Vec<CertificateEcho>,
    pub experiments: &'a [Outcome],
    pub criteria: Vec<CriterionStatus>,
    pub passed: bool,
    pub files: Vec<String>,
}

impl<'a> Manifest<'a> {
    pub fn new(config: &'a ExperimentConfig, certificates: Vec<CertificateEcho>, experiments: &'a [Outcome]) -> Self {
        let mut merged: BTreeMap<u8, bool> = BTreeMap::new();
        for o in experiments {
            for (k, v) in o.criteria() {
                *merged.entry(k).or_insert(true) &= v;
            }
        }
        Self {
            tool: "hypoflow",
            version: env!("CARGO_PKG_VERSION"),
            config,
            certificates,
            experiments,
            criteria: merged.into_iter().map(|(criterion, passed)| CriterionStatus { criterion, passed }).collect(),
            passed: experiments.iter().all(Outcome::passed),
            files: vec![],
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Writes `{stem}_norm.csv` (one per extra weight as `{stem}_norm_{weight}.csv`),
/// `{stem}_bound.csv`, `{stem}_ratio.csv` and `{stem}_fit.csv`. Missing data
/// gives header-only files.
pub fn emit_plotdata(report: &DecayReport, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let t = &report.times;
    let mut tables = Vec::new();
    let primary: &[f64] = report.norms.first().map_or(&[], |s| s.values.as_slice());
    for (k, s) in report.norms.iter().enumerate() {
        let name = if k == 0 { format!("{stem}_norm") } else { format!("{stem}_norm_{}", s.weight) };
        tables.push(Table::from_series(name, &["t", "value"], t, &[&s.values]));
    }
    if report.norms.is_empty() {
        tables.push(Table::new(format!("{stem}_norm"), &["t", "value"]));
    }
    let has_bound = !report.bound.is_empty() && report.bound.len() == t.len() && primary.len() == t.len();
    let (bound, ratio) = if has_bound {
        let ratio: Vec<f64> = primary.iter().zip(&report.bound).map(|(v, b)| if *b > 0.0 { v / b } else { 0.0 }).collect();
        (
            Table::from_series(format!("{stem}_bound"), &["t", "bound"], t, &[&report.bound]),
            Table::from_series(format!("{stem}_ratio"), &["t", "ratio"], t, &[&ratio]),
        )
    } else {
        (Table::new(format!("{stem}_bound"), &["t", "bound"]), Table::new(format!("{stem}_ratio"), &["t", "ratio"]))
    };
    tables.push(bound);
    tables.push(ratio);
    let mut fit_table = Table::new(format!("{stem}_fit"), &["t", "log_value", "log_fit", "residual", "in_window"]);
    if let Some(fit) = report.fit {
        for (tk, v) in t.iter().zip(primary) {
            if *v <= 0.0 {
                continue;
            }
            let model = match fit.kind {
                FitKind::Exponential => fit.intercept - fit.value * tk,
                FitKind::Algebraic => fit.intercept + fit.value * (1.0 + tk).ln(),
            };
            let inside = *tk >= fit.window.0 - 1e-12 && *tk <= fit.window.1 + 1e-12;
            fit_table.push(vec![num(*tk), num(v.ln()), num(model), num(v.ln() - model), (inside as u8).to_string()]);
        }
    }
    tables.push(fit_table);
    tables.iter().map(|tb| tb.write(dir)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::NormSeries;

    fn empty_report() -> DecayReport {
        DecayReport {
            label: "empty".into(),
            times: vec![],
            norms: vec![],
            bound: vec![],
            fit: None,
            certified: 0.0,
            violations: vec![],
            passed: true,
        }
    }

    #[test]
    fn empty_report_gives_header_only_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plotdata(&empty_report(), dir.path(), "e").unwrap();
        assert_eq!(files.len(), 4);
        for f in files {
            let text = fs::read_to_string(&f).unwrap();
            assert_eq!(text.lines().count(), 1, "{}", f.display());
        }
    }

    #[test]
    fn ratio_and_fit_window() {
        let dir = tempfile::tempdir().unwrap();
        let times: Vec<f64> = (0..5).map(|k| k as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| (-t).exp()).collect();
        let mut r = empty_report();
        r.times = times.clone();
        r.norms = vec![NormSeries { weight: "gamma_inf".into(), values: values.clone() }];
        r.bound = values.iter().map(|v| 2.0 * v).collect();
        r.fit = crate::fit::exponential_rate(&times, &values, (2.0, 4.0));
        emit_plotdata(&r, dir.path(), "m").unwrap();
        let ratio = fs::read_to_string(dir.path().join("m_ratio.csv")).unwrap();
        assert!(ratio.lines().skip(1).all(|l| l.ends_with(",0.5")));
        let fit = fs::read_to_string(dir.path().join("m_fit.csv")).unwrap();
        let marks: Vec<&str> = fit.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
        assert_eq!(marks, ["0", "0", "1", "1", "1"]);
    }

    #[test]
    fn numbers_use_point_decimal() {
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(1e-20), "1e-20");
        assert_eq!(num(3.0), "3.0");
    }
}
