//! Scenario files, report files and transcript files.
//!
//! JSON output is canonical: object keys sorted, two-space indentation,
//! trailing newline, floats printed in shortest round-trip form. Every file
//! is written to a temporary sibling and renamed into place, so a failed
//! write never leaves a partial file behind.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use fairtoss_core::sim::{ComparisonTable, ExperimentReport, MetricRow, ScenarioConfig};
use fairtoss_core::Transcript;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown format `{other}` (expected json or csv)")),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        })
    }
}

/// Anything that can be written as a report.
pub trait Report: Serialize {
    fn metric_rows(&self) -> Vec<MetricRow>;
}

impl Report for ExperimentReport {
    fn metric_rows(&self) -> Vec<MetricRow> {
        ExperimentReport::metric_rows(self)
    }
}

impl Report for ComparisonTable {
    fn metric_rows(&self) -> Vec<MetricRow> {
        ComparisonTable::metric_rows(self)
    }
}

/// Parse a scenario from JSON text. Errors name the offending field.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, fairtoss_core::Error> {
    let config: ScenarioConfig = from_json_with_path(text)?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|source| Error::InFile {
        path: path.to_path_buf(),
        source,
    })
}

/// Deserialize JSON, reporting errors as `Config { path, .. }` with the
/// dotted path of the field that failed.
pub fn from_json_with_path<T: DeserializeOwned>(text: &str) -> Result<T, fairtoss_core::Error> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        fairtoss_core::Error::Config {
            path: if path == "." { String::new() } else { path },
            message: strip_position(&inner),
        }
    })
}

fn strip_position(e: &serde_json::Error) -> String {
    let text = e.to_string();
    match text.rfind(" at line ") {
        Some(i) if e.line() > 0 => format!("{} (line {}, column {})", &text[..i], e.line(), e.column()),
        _ => text,
    }
}

/// Canonical JSON text for any serializable value.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    // `Value` keeps object keys in a BTreeMap, which sorts them.
    let value = serde_json::to_value(value).expect("reports and transcripts serialize to JSON");
    let mut text = serde_json::to_string_pretty(&value).expect("a JSON value always prints");
    text.push('\n');
    text
}

/// Flat CSV: one row per (mechanism, metric).
pub fn to_csv(rows: &[MetricRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("writing CSV to memory");
    }
    String::from_utf8(writer.into_inner().expect("flushing CSV to memory")).expect("CSV of UTF-8 fields")
}

pub fn render_report<R: Report + ?Sized>(report: &R, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => to_canonical_json(report),
        ReportFormat::Csv => to_csv(&report.metric_rows()),
    }
}

pub fn write_report<R: Report + ?Sized>(report: &R, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    write_atomic(path, render_report(report, format).as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json_with_path(&text).map_err(|source| Error::InFile {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_csv_rows(path: impl AsRef<Path>) -> Result<Vec<MetricRow>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    reader
        .deserialize()
        .collect::<Result<Vec<MetricRow>, _>>()
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

pub fn write_transcript(transcript: &Transcript, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, to_canonical_json(transcript).as_bytes())
}

pub fn read_transcript(path: impl AsRef<Path>) -> Result<Transcript> {
    read_json(path)
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new()
        .prefix(".fairtoss-")
        .suffix(".tmp")
        .tempfile_in(dir)
        .map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
