use std::path::PathBuf;

use thiserror::Error;

use crate::topology::NodeId;

/// Errors raised anywhere in the simulator.
///
/// The harness maps these onto process exit codes: configuration and
/// topology problems are user errors (1), everything numerical or raised
/// while a run is in progress is a runtime error (2).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("unknown node id {0}")]
    UnknownNode(NodeId),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cost {value} for {context} is outside [0, 1]")]
    CostOutOfRange { value: f64, context: String },

    #[error("no policy installed at non-leaf node {0}")]
    MissingPolicy(NodeId),

    #[error("policy `{policy}` cannot run under {model} feedback")]
    IncompatibleFeedback { policy: String, model: String },

    #[error("environment does not expose expected costs")]
    NoExpectedCosts,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error(s):\n{}", .0.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Topology(_)
            | Error::UnknownNode(_)
            | Error::InvalidParameter { .. }
            | Error::IncompatibleFeedback { .. }
            | Error::Config(_)
            | Error::Io { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit_cost(value: f64, context: impl FnOnce() -> String) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::CostOutOfRange {
            value,
            context: context(),
        })
    }
}
