//! Run reports and CSV series: fixed 17-significant-digit floats, stable
//! column sets, and a JSON report echoing the canonical config with a
//! content hash.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const ARTIFACT_NAME: &str = "chaos-ns";
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Lossless decimal rendering of a 64-bit float (17 significant digits).
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct CsvTable {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            pass,
            detail,
        }
    }
}

#[derive(Serialize)]
pub struct RunReport {
    pub artifact: ArtifactInfo,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub summary: serde_json::Value,
    pub verdicts: Vec<Verdict>,
    pub series: Vec<String>,
}

#[derive(Serialize)]
pub struct ArtifactInfo {
    pub name: &'static str,
    pub version: &'static str,
}

impl RunReport {
    pub fn new(canonical_config: &str) -> Self {
        let config: serde_json::Value =
            serde_json::from_str(canonical_config).expect("canonical config parses");
        Self {
            artifact: ArtifactInfo {
                name: ARTIFACT_NAME,
                version: ARTIFACT_VERSION,
            },
            config_hash: content_hash(canonical_config),
            config,
            summary: serde_json::Value::Object(Default::default()),
            verdicts: Vec::new(),
            series: Vec::new(),
        }
    }

    pub fn insert_summary(&mut self, key: &str, value: serde_json::Value) {
        if let serde_json::Value::Object(map) = &mut self.summary {
            map.insert(key.to_string(), value);
        }
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut file = fs::File::create(path)?;
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        file.write_all(text.as_bytes())?;
        file.write_all(b"\n")?;
        Ok(())
    }
}

/// Content hash of the canonical config echo.
pub fn content_hash(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{}", &hex[..16])
}
