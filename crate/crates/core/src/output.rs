//! Artifact writers. Every CSV is read back after writing and checked
//! against its column schema.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Expected content of a CSV column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Column {
    Int,
    Float,
    /// Float or empty.
    OptFloat,
    Text,
}

#[derive(Clone, Debug)]
pub struct CsvSchema {
    pub header: Vec<&'static str>,
    pub kinds: Vec<Column>,
}

impl CsvSchema {
    pub fn new(columns: &[(&'static str, Column)]) -> Self {
        Self {
            header: columns.iter().map(|c| c.0).collect(),
            kinds: columns.iter().map(|c| c.1).collect(),
        }
    }
}

/// Shortest round-trip representation; `inf`/`NaN` parse back as f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn check_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::OutputCheck {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn write_csv(path: &Path, schema: &CsvSchema, rows: &[Vec<String>]) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    {
        let mut w = csv::Writer::from_path(path).map_err(|e| check_err(path, e.to_string()))?;
        w.write_record(&schema.header)
            .map_err(|e| check_err(path, e.to_string()))?;
        for row in rows {
            w.write_record(row)
                .map_err(|e| check_err(path, e.to_string()))?;
        }
        w.flush().map_err(|e| io_err(path, e))?;
    }
    verify_csv(path, schema, rows.len())
}

/// Parses `path` back and checks header, row count and cell types.
pub fn verify_csv(path: &Path, schema: &CsvSchema, expected_rows: usize) -> Result<()> {
    let mut r = csv::Reader::from_path(path).map_err(|e| check_err(path, e.to_string()))?;
    let header = r
        .headers()
        .map_err(|e| check_err(path, e.to_string()))?
        .clone();
    if header.iter().ne(schema.header.iter().copied()) {
        return Err(check_err(
            path,
            format!("header {:?} != {:?}", header, schema.header),
        ));
    }
    let mut count = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| check_err(path, e.to_string()))?;
        for (j, (cell, kind)) in rec.iter().zip(&schema.kinds).enumerate() {
            let ok = match kind {
                Column::Int => cell.parse::<i64>().is_ok(),
                Column::Float => cell.parse::<f64>().is_ok(),
                Column::OptFloat => cell.is_empty() || cell.parse::<f64>().is_ok(),
                Column::Text => !cell.is_empty(),
            };
            if !ok {
                return Err(check_err(
                    path,
                    format!(
                        "row {}, column `{}`: bad value `{cell}`",
                        i + 1,
                        schema.header[j]
                    ),
                ));
            }
        }
        count += 1;
    }
    if count != expected_rows {
        return Err(check_err(
            path,
            format!("{count} rows read back, {expected_rows} written"),
        ));
    }
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Record of one CLI invocation, written as `manifest.json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario_hash: String,
    pub tool_version: String,
    pub seed: u64,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    pub duration_s: f64,
}

/// Collects written files relative to an output root.
pub struct OutputSet {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputSet {
    pub fn new(root: &Path) -> Result<Self> {
        ensure_dir(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&mut self, relative: &str) -> PathBuf {
        self.files.push(relative.to_string());
        self.root.join(relative)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn into_files(self) -> Vec<String> {
        self.files
    }
}
