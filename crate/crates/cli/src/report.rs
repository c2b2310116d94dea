use std::fmt::Write as _;

use pap_core::certify::to_json_string;
use serde_json::{json, Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Everything one run produces. `document` replaces the generic JSON
/// envelope when the command has its own schema (certificates).
#[derive(Debug)]
pub struct Report {
    pub command: &'static str,
    pub config: Map<String, Value>,
    pub checks: Vec<Check>,
    pub data: Value,
    pub table: Table,
    pub document: Option<String>,
}

impl Report {
    pub fn new(command: &'static str, config: Map<String, Value>) -> Self {
        Self {
            command,
            config,
            checks: Vec::new(),
            data: Value::Null,
            table: Table::default(),
            document: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => match &self.document {
                Some(doc) => format!("{doc}\n"),
                None => self.render_json(),
            },
            Format::Csv => self.render_csv(),
        }
    }

    fn render_json(&self) -> String {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| json!({ "name": c.name, "passed": c.passed, "detail": c.detail }))
            .collect();
        let body = json!({
            "command": self.command,
            "config": self.config,
            "passed": self.passed(),
            "checks": checks,
            "data": self.data,
        });
        let mut out = to_json_string(&body).expect("JSON values serialize");
        out.push('\n');
        out
    }

    fn render_csv(&self) -> String {
        let mut out = format!("# papverify {}\n", self.command);
        for (k, v) in &self.config {
            let v = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            let _ = writeln!(out, "# {k}={v}");
        }
        for c in &self.checks {
            let _ = writeln!(out, "# check {}: {} ({})", c.name, pass_word(c.passed), c.detail);
        }
        let _ = writeln!(out, "# passed={}", self.passed());
        out.push_str(&self.table.header.join(","));
        out.push('\n');
        for row in &self.table.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn pass_word(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn coords(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}
