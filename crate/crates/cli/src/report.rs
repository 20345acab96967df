//! Report envelope, input digests and CSV output.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const REPORT_SCHEMA: &str = "srm-report-v1";

/// One input of a run: a file on disk or an inline definition.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct InputDigest {
    pub role: String,
    pub source: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of_bytes(role: &str, source: &str, bytes: &[u8]) -> Self {
        InputDigest { role: role.into(), source: source.into(), sha256: hex(&Sha256::digest(bytes)) }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportEnvelope {
    pub schema: &'static str,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub parameters: Value,
    pub results: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_seconds: Option<f64>,
}

impl ReportEnvelope {
    pub fn new(command: &str, inputs: Vec<InputDigest>, parameters: Value, results: Value) -> Self {
        ReportEnvelope {
            schema: REPORT_SCHEMA,
            tool: "srm",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            inputs,
            parameters,
            results,
            timing_seconds: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Writes `(abscissa, value)` rows under a header.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    writeln!(f, "{}", header.join(","))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        let d = InputDigest::of_bytes("surface", "-", b"");
        assert_eq!(d.sha256, "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn csv_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_csv(&p, &["r", "phi"], &[vec![0.0, 1.5], vec![0.5, 1.25]]).unwrap();
        let s = fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "r,phi");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("5.0"));
    }
}
