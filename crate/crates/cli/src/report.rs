//! JSON report, schema `wcurvlab.report/1`.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::dump::DumpEntry;
use crate::error::{exit, Result};

pub const SCHEMA: &str = "wcurvlab.report/1";
pub const REPORT_FILE: &str = "report.json";

/// JSON number for finite values; `"inf"`, `"-inf"` or `"nan"` otherwise.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else if v.is_nan() {
        Value::from("nan")
    } else if v > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

pub fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One thresholded check.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub value: Value,
    pub threshold: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Verdict {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Verdict {
            name: name.into(),
            value: num(value),
            threshold,
            comparison: Comparison::AtMost,
            pass: value <= threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Verdict {
            name: name.into(),
            value: num(value),
            threshold,
            comparison: Comparison::AtLeast,
            pass: value >= threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    /// The effective config after command-line overrides; re-running on it
    /// reproduces every number below.
    pub config: Value,
    pub status: Status,
    pub exit_code: i32,
    pub results: Value,
    pub verdicts: Vec<Verdict>,
    pub traces: Map<String, Value>,
    pub dumps: Vec<DumpEntry>,
    pub summary: Vec<String>,
    pub error: Option<String>,
}

impl Report {
    pub fn status_for(code: i32) -> Status {
        match code {
            exit::OK => Status::Pass,
            exit::VERIFICATION_FAILED => Status::Fail,
            _ => Status::Error,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("report serializes");
        v.push(b'\n');
        v
    }

    /// Writes `dir/report.json` through a temp file and a rename.
    pub fn write_atomic(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(REPORT_FILE), &self.to_bytes())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::Builder::new()
        .prefix(".wcurvlab-")
        .suffix(".tmp")
        .tempfile_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
