//! Scenario files, single runs, reports and parameter sweeps.
//!
//! Scenario and report files share one YAML dialect: enum choices are plain
//! strings (`bell`, `hadamard`) or single-key maps (`{werner: {v: 0.9}}`),
//! complex numbers are `[re, im]` pairs and matrices are row-major nested
//! lists. Unknown keys are rejected.

mod config;
mod report;
mod sweep;

use std::path::PathBuf;

use thiserror::Error;

use crate::error::Error;

pub use config::{load_scenario, parse_scenario, MeasurementSpec, ScenarioConfig, StateSpec};
pub use report::{
    emit_report, emit_sweep, format_number, parse_report, parse_sweep_document, run_once,
    sample_probabilities, OutputFormat, ReportDocument, SweepDocument, SWEEP_HEADER,
};
pub use sweep::{derive_seed, run_sweep, SweepRecord, SweepSpec};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid {field}: {source}")]
    Validation { field: String, source: Error },

    #[error("invalid sweep: {0}")]
    Sweep(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl HarnessError {
    /// Process exit code: 1 for bad input, 2 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Numerical(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn from_core(field: impl Into<String>, source: Error) -> Self {
        match source {
            Error::NoConvergence(what) => HarnessError::Numerical(what.to_string()),
            source => HarnessError::Validation {
                field: field.into(),
                source,
            },
        }
    }
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;
