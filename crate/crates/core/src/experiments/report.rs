//! Report records and their JSON/CSV serialisation.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::model::ModelConfig;

use super::RunOptions;

/// One checked inequality or classification.
#[derive(Clone, Debug, Serialize)]
pub struct Record {
    pub sweep_key: String,
    pub measured: f64,
    pub bound: f64,
    /// `measured / bound`; `null` for classification records.
    pub ratio: f64,
    pub pass: bool,
    pub tolerance: f64,
}

fn ratio(measured: f64, bound: f64) -> f64 {
    if bound != 0.0 {
        measured / bound
    } else if measured == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

impl Record {
    /// Passes when `measured ≤ bound + tolerance`.
    pub fn at_most(key: impl Into<String>, measured: f64, bound: f64, tolerance: f64) -> Self {
        Record {
            sweep_key: key.into(),
            measured,
            bound,
            ratio: ratio(measured, bound),
            pass: measured <= bound + tolerance,
            tolerance,
        }
    }

    /// A classification outcome compared against an expected verdict.
    pub fn classification(key: impl Into<String>, measured: f64, threshold: f64, pass: bool) -> Self {
        Record { sweep_key: key.into(), measured, bound: threshold, ratio: f64::NAN, pass, tolerance: 0.0 }
    }
}

/// Fixed-width rendering of a sweep coordinate so keys sort numerically.
pub fn num(x: f64) -> String {
    format!("{x:09.4}")
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfigEcho {
    pub model: ModelConfig,
    pub options: RunOptions,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config: ConfigEcho,
    pub records: Vec<Record>,
    pub verdict: bool,
    pub notes: Vec<String>,
    pub summary: BTreeMap<String, f64>,
    pub details: serde_json::Value,
}

impl ExperimentReport {
    pub fn new(name: &str, config: &ModelConfig, options: &RunOptions) -> Self {
        ExperimentReport {
            name: name.to_string(),
            config: ConfigEcho { model: config.clone(), options: options.clone() },
            records: Vec::new(),
            verdict: false,
            notes: Vec::new(),
            summary: BTreeMap::new(),
            details: serde_json::Value::Null,
        }
    }

    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = Record>) {
        self.records.extend(records);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.summary.insert(key.to_string(), value);
    }

    /// Sorts records by key and sets the verdict to the conjunction of passes.
    pub fn finish(mut self) -> Self {
        self.records.sort_by(|a, b| a.sweep_key.cmp(&b.sweep_key));
        self.verdict = !self.records.is_empty() && self.records.iter().all(|r| r.pass);
        self
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn record(&self, key: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.sweep_key == key)
    }

    pub fn records_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
        self.records.iter().filter(move |r| r.sweep_key.starts_with(prefix))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sweep_key", "measured", "bound", "ratio", "pass"])?;
        for r in &self.records {
            w.write_record([
                r.sweep_key.clone(),
                r.measured.to_string(),
                r.bound.to_string(),
                r.ratio.to_string(),
                r.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<name>.json` and `<name>.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join(format!("{}.json", self.name));
        let csv = dir.join(format!("{}.csv", self.name));
        std::fs::write(&json, self.to_json()?)?;
        self.write_csv(std::fs::File::create(&csv)?)?;
        Ok((json, csv))
    }
}
