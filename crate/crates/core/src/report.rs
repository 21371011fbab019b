//! Run manifests and the on-disk report format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::games::GameReport;
use crate::oracles::{write_records_csv, QueryWeightRecord};

/// JSON schema every emitted report conforms to.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

/// Environment variable holding a fixed timestamp (seconds since the epoch).
pub const SOURCE_DATE_EPOCH: &str = "SOURCE_DATE_EPOCH";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Value,
    pub seed: u64,
    pub version: String,
    /// Left empty unless supplied, so reports stay reproducible.
    pub timestamp: Option<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: impl Serialize, seed: u64) -> Result<Self> {
        Ok(Self {
            subcommand: subcommand.to_string(),
            config: serde_json::to_value(config)?,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: None,
        })
    }

    pub fn with_timestamp(mut self, timestamp: Option<String>) -> Self {
        self.timestamp = timestamp;
        self
    }
}

/// `explicit`, else [`SOURCE_DATE_EPOCH`], else none.
pub fn resolve_timestamp(explicit: Option<&str>) -> Option<String> {
    explicit.map(str::to_string).or_else(|| {
        std::env::var(SOURCE_DATE_EPOCH)
            .ok()
            .filter(|s| !s.is_empty())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub manifest: RunManifest,
    pub results: GameReport,
}

impl Report {
    pub fn new(manifest: RunManifest, results: GameReport) -> Self {
        Self { manifest, results }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn emit_report(report: &Report, path: &Path) -> Result<()> {
    fs::write(path, report.to_json()?).map_err(io_error(path))
}

/// Query-weight transcript as CSV next to a report.
pub fn emit_transcript_csv(records: &[QueryWeightRecord], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(io_error(path))?;
    write_records_csv(records, file)
}
