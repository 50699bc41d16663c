//! Experiment harness around the clustering library: ingestion, synthetic
//! instance generation, experiment orchestration, audits, and JSON reports.
//!
//! All structured output is JSON with deterministic field order; a config
//! plus a seed reproduces a report byte for byte.

use thiserror::Error;

pub mod auditor;
pub mod config;
pub mod generate;
pub mod ingest;
pub mod report;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] dpcluster_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("ingestion error: {0}")]
    Ingest(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl HarnessError {
    /// Stable machine-readable tag for structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Core(dpcluster_core::Error::GuardExceeded(_)) => "guard_exceeded",
            HarnessError::Core(dpcluster_core::Error::AuditRefused(_)) => "audit_refused",
            HarnessError::Core(dpcluster_core::Error::SolverFailure { .. }) => "solver_failure",
            HarnessError::Core(_) => "input",
            HarnessError::Io { .. } => "io",
            HarnessError::Ingest(_) => "ingest",
            HarnessError::Config(_) => "config",
            HarnessError::Serialize(_) => "serialize",
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
