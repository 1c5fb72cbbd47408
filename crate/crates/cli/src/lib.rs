//! Pipelines behind the `kvgap` binary.
//!
//! Every command fills a [`Report`]: summary values, residual checks with
//! their tolerances, failure and review records, and artifact files. The
//! report is written to the output directory and decides the exit code.

pub mod commands;
pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use kvgap::report::{Check, CheckReport};
use thiserror::Error;

pub use config::{Budgets, Overrides, RunConfig, WindowSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: kvgap::Error },
    #[error("advisory: {0}")]
    Advisory(kvgap::Error),
    #[error(transparent)]
    Core(#[from] kvgap::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 3,
        }
    }
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), msg: e.to_string() })
}

/// Reads and parses one input artifact, attaching the path to parse errors.
pub fn load<T>(path: &Path, parse: impl FnOnce(&str) -> kvgap::Result<T>) -> Result<T, CliError> {
    let text = read_file(path)?;
    parse(&text).map_err(|source| CliError::Input { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    /// An assertion failed; the run exits nonzero.
    Fail,
    /// A recorded deviation that does not fail the run.
    Flag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub kind: RecordKind,
    pub name: String,
    pub detail: String,
}

impl Record {
    pub fn line(&self, command: &str) -> String {
        let tag = match self.kind {
            RecordKind::Fail => "FAIL",
            RecordKind::Flag => "FLAG",
        };
        format!("{tag}\t{command}\t{}\t{}", self.name, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub summary: Vec<(String, String)>,
    pub checks: Vec<(Check, f64)>,
    pub records: Vec<Record>,
    pub files: Vec<(String, String)>,
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl Report {
    pub fn new(command: &'static str) -> Self {
        Report { command, summary: Vec::new(), checks: Vec::new(), records: Vec::new(), files: Vec::new() }
    }

    pub fn text(&mut self, key: impl Into<String>, value: impl std::fmt::Display) {
        self.summary.push((key.into(), value.to_string()));
    }

    pub fn value(&mut self, key: impl Into<String>, value: f64) {
        self.summary.push((key.into(), fmt_f64(value)));
    }

    /// Records a residual check; a residual above `tol` is a failure.
    pub fn check(&mut self, check: Check, tol: f64) {
        if !check.within(tol) {
            let detail = format!("residual {} > {} at {}", fmt_f64(check.max_residual), fmt_f64(tol), check.worst);
            self.fail(check.name.clone(), detail);
        }
        self.checks.push((check, tol));
    }

    pub fn checks_from(&mut self, prefix: &str, report: CheckReport, tol: f64) {
        for mut c in report.checks {
            if !prefix.is_empty() {
                c.name = format!("{prefix}.{}", c.name);
            }
            self.check(c, tol);
        }
    }

    /// A pass/fail assertion without a residual.
    pub fn assert(&mut self, name: &str, holds: bool, detail: impl FnOnce() -> String) {
        self.text(name, if holds { "pass" } else { "fail" });
        if !holds {
            self.fail(name, detail());
        }
    }

    pub fn fail(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.records.push(Record { kind: RecordKind::Fail, name: name.into(), detail: detail.into() });
    }

    pub fn flag(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.records.push(Record { kind: RecordKind::Flag, name: name.into(), detail: detail.into() });
    }

    pub fn file(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn failed(&self) -> bool {
        self.records.iter().any(|r| r.kind == RecordKind::Fail)
    }

    pub fn summary_tsv(&self) -> String {
        let mut out = String::from("key\tvalue\n");
        for (k, v) in &self.summary {
            writeln!(out, "{k}\t{v}").unwrap();
        }
        out
    }

    pub fn checks_tsv(&self) -> String {
        let mut out = String::from("check\tmax_residual\ttolerance\tchecked\tstatus\tworst\n");
        for (c, tol) in &self.checks {
            let status = if c.within(*tol) { "pass" } else { "fail" };
            writeln!(out, "{}\t{}\t{}\t{}\t{status}\t{}", c.name, fmt_f64(c.max_residual), fmt_f64(*tol), c.checked, c.worst)
                .unwrap();
        }
        out
    }

    pub fn records_tsv(&self) -> String {
        self.records.iter().map(|r| r.line(self.command) + "\n").collect()
    }

    pub fn human_summary(&self) -> String {
        let mut out = format!("{}\n", self.command);
        let width = self.summary.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &self.summary {
            writeln!(out, "  {k:<width$}  {v}").unwrap();
        }
        let failed = self.checks.iter().filter(|(c, tol)| !c.within(*tol)).count();
        writeln!(out, "  checks: {} run, {failed} failed", self.checks.len()).unwrap();
        for r in &self.records {
            writeln!(out, "  {}", r.line(self.command)).unwrap();
        }
        out
    }

    /// Writes the artifacts, `summary.tsv`, `checks.tsv`, `records.tsv` and
    /// `summary.txt` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), msg: e.to_string() })?;
        let outputs = [
            ("summary.tsv".to_string(), self.summary_tsv()),
            ("checks.tsv".to_string(), self.checks_tsv()),
            ("records.tsv".to_string(), self.records_tsv()),
            ("summary.txt".to_string(), self.human_summary()),
        ];
        for (name, contents) in self.files.iter().cloned().chain(outputs) {
            let path = dir.join(&name);
            fs::write(&path, contents).map_err(|e| CliError::Io { path, msg: e.to_string() })?;
        }
        Ok(())
    }
}
