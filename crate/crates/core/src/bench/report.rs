use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Bias,
    Sts,
    Summ,
    Heatmap,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Bias => "bias",
            Task::Sts => "sts",
            Task::Summ => "summ",
            Task::Heatmap => "heatmap",
        })
    }
}

/// Named per-item values, e.g. the two scores of one triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailRow {
    pub id: String,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: Task,
    pub backend: String,
    pub anonymization: String,
    pub metrics: BTreeMap<String, f64>,
    pub metadata: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<DetailRow>,
}

impl TaskReport {
    pub fn new(task: Task, backend: impl Into<String>, anonymization: impl Into<String>) -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert("timestamp".to_string(), chrono::Utc::now().to_rfc3339());
        Self {
            task,
            backend: backend.into(),
            anonymization: anonymization.into(),
            metrics: BTreeMap::new(),
            metadata,
            details: Vec::new(),
        }
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    pub(crate) fn set(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.insert(key.to_string(), value.to_string());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Config(format!("unknown report format {other:?} (json or csv)"))),
        }
    }
}

/// One row per report: `task,backend,anonymization` then every metric key
/// appearing in any report, sorted. Missing values are left blank.
pub fn write_reports_csv<W: Write>(reports: &[TaskReport], out: W) -> Result<()> {
    let keys: BTreeSet<&str> = reports.iter().flat_map(|r| r.metrics.keys().map(String::as_str)).collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["task", "backend", "anonymization"];
    header.extend(keys.iter().copied());
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![r.task.to_string(), r.backend.clone(), r.anonymization.clone()];
        row.extend(keys.iter().map(|k| r.metrics.get(*k).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn render_report(report: &TaskReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => {
            let mut buf = Vec::new();
            write_reports_csv(std::slice::from_ref(report), &mut buf)?;
            Ok(String::from_utf8(buf).expect("csv output is utf-8"))
        }
    }
}

pub fn write_report(report: &TaskReport, path: &Path, format: ReportFormat) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, render_report(report, format)?).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<TaskReport> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&body)?)
}
