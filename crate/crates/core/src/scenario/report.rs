//! Run reports and their CSV/JSON encodings.
//!
//! Floats are written with 17 significant digits so that a report read back
//! reproduces every bit. Wall time is kept off the encoded report so that
//! two runs with the same seed emit identical bytes.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Number, Value};

use super::config::{ScenarioConfig, ScenarioType};

pub const CSV_HEADER: &str = "scenario,record_name,value,residual";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub name: String,
    pub value: f64,
    /// Verification residual attached to the value; zero when none applies.
    pub residual: f64,
}

impl Record {
    pub fn new(name: impl Into<String>, value: f64, residual: f64) -> Self {
        Self {
            name: name.into(),
            value,
            residual,
        }
    }

    pub fn plain(name: impl Into<String>, value: f64) -> Self {
        Self::new(name, value, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format '{other}' (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: ScenarioType,
    /// Effective configuration, after command-line overrides.
    pub config: ScenarioConfig,
    /// Tabular results; these are the CSV rows.
    pub records: Vec<Record>,
    /// Scalar outcomes of the whole run (e.g. a violation threshold). JSON only.
    pub summary: Vec<Record>,
    pub diagnostics: Vec<String>,
    pub wall_time: Duration,
}

impl RunReport {
    pub fn record(&self, name: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn summary_value(&self, name: &str) -> Option<f64> {
        self.summary.iter().find(|r| r.name == name).map(|r| r.value)
    }

    fn non_finite(&self) -> Option<&Record> {
        self.records
            .iter()
            .chain(&self.summary)
            .find(|r| !r.value.is_finite() || !r.residual.is_finite())
    }

    pub fn to_csv(&self) -> Result<String, String> {
        if let Some(r) = self.non_finite() {
            return Err(format!("record '{}' is not finite", r.name));
        }
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{}",
                self.scenario,
                csv_field(&r.name),
                fmt_float(r.value),
                fmt_float(r.residual)
            )
            .expect("writing to a String");
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String, String> {
        if let Some(r) = self.non_finite() {
            return Err(format!("record '{}' is not finite", r.name));
        }
        let rows = |rs: &[Record]| -> Value {
            Value::Array(
                rs.iter()
                    .map(|r| {
                        let mut m = Map::new();
                        m.insert("record_name".into(), Value::String(r.name.clone()));
                        m.insert("value".into(), json_float(r.value));
                        m.insert("residual".into(), json_float(r.residual));
                        Value::Object(m)
                    })
                    .collect(),
            )
        };
        let doc = json!({
            "scenario": self.scenario.as_str(),
            "config": serde_json::to_value(&self.config).map_err(|e| e.to_string())?,
            "records": rows(&self.records),
            "summary": rows(&self.summary),
            "diagnostics": self.diagnostics,
        });
        let mut s = serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?;
        s.push('\n');
        Ok(s)
    }

    pub fn encode(&self, format: OutputFormat) -> Result<String, String> {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

/// 17 significant digits in scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_float(x: f64) -> Value {
    Value::Number(Number::from_str(&fmt_float(x)).expect("finite float is a JSON number"))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Parsed CSV row, as read back by consumers and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub scenario: String,
    pub record_name: String,
    pub value: f64,
    pub residual: f64,
}

/// Reads CSV produced by [`RunReport::to_csv`]. Record names never contain commas
/// in practice, so quoting is handled only for the simple case.
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(CSV_HEADER) => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.rsplitn(3, ',').collect();
            let (residual, value, head) = match cols.as_slice() {
                [r, v, h] => (*r, *v, *h),
                _ => return Err(format!("line {}: expected 4 columns", i + 2)),
            };
            let (scenario, name) = head
                .split_once(',')
                .ok_or_else(|| format!("line {}: expected 4 columns", i + 2))?;
            let name = name
                .strip_prefix('"')
                .and_then(|n| n.strip_suffix('"'))
                .map_or_else(|| name.to_owned(), |n| n.replace("\"\"", "\""));
            let num = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2));
            Ok(CsvRow {
                scenario: scenario.to_owned(),
                record_name: name,
                value: num(value)?,
                residual: num(residual)?,
            })
        })
        .collect()
}
