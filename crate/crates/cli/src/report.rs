use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const REPORT_FORMAT: &str = "occupancy-run-report";
pub const REPORT_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "run_report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Failed,
}

/// Written after every command, successful or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub command: String,
    pub status: Status,
    pub exit_code: i32,
    pub error: Option<String>,
    /// Resolved configuration; absent when the configuration itself failed.
    pub config: Option<RunConfig>,
    /// Derived seed of every random stream the command used.
    pub seeds: BTreeMap<String, u64>,
    /// Wall-clock seconds per stage.
    pub timings_secs: BTreeMap<String, f64>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
    pub summary: serde_json::Value,
}

impl RunReport {
    pub fn new(command: &str, config: Option<RunConfig>) -> Self {
        Self {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            status: Status::Ok,
            exit_code: 0,
            error: None,
            config,
            seeds: BTreeMap::new(),
            timings_secs: BTreeMap::new(),
            artifacts: Vec::new(),
            warnings: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}
