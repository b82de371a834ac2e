use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IoError, RunConfig};
use crate::analysis::RateFit;
use crate::model::{Exponents, HypothesisReport};
use crate::solver::StopReason;

pub const TOOL_VERSION: &str = concat!("blowlab ", env!("CARGO_PKG_VERSION"));

/// Everything needed to reproduce and audit one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Subcommand that produced the directory.
    pub command: String,
    /// Command-specific options, for the record.
    #[serde(default)]
    pub options: serde_json::Value,
    pub config_echo: RunConfig,
    pub exponents: Exponents,
    pub hypothesis_report: HypothesisReport,
    pub stop_reason: Option<StopReason>,
    #[serde(rename = "T_est")]
    pub t_est: Option<f64>,
    pub fits: Vec<RateFit>,
    pub tool_version: String,
    pub wall_seconds: f64,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| IoError::Json(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| IoError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        serde_json::from_str(text).map_err(|e| IoError::Json(e.to_string()))
    }
}
