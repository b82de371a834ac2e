//! Configuration parsing, run manifests, CSV tables and SVG charts.

mod config;
mod manifest;
mod svg;
mod tables;

pub use config::{
    defaults, parse_config, BoundaryKind, DomainKind, DomainSection, FitSection, GridSection,
    InitKindName, InitSection, ModelSection, Resolved, RunConfig, TimeSection,
};
pub use manifest::{RunManifest, TOOL_VERSION};
pub use svg::{loglog_svg, write_svg, Curve};
pub use tables::{
    read_doubling, read_fits, read_series, read_snapshots, real, write_doubling, write_fits,
    write_series, write_snapshots, write_table, DoublingRow, DOUBLING_COLUMNS, FIT_COLUMNS,
    SERIES_COLUMNS, SNAPSHOT_COLUMNS,
};

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Csv { path: String, message: String },
    #[error("manifest: {0}")]
    Json(String),
}

impl IoError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        IoError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}
