use std::path::Path;

use stn_insight::partition::PartitionError;
use stn_insight::prompt::PromptError;
use stn_insight::tables::TableError;
use stn_insight::trajectory::TrajectoryError;
use stn_insight::{ClusterLimits, LlmError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{message}")]
    Constraint {
        message: String,
        limits: Option<ClusterLimits>,
    },
    #[error("{0}")]
    Endpoint(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Input(_) => 2,
            CliError::Constraint { .. } => 3,
            CliError::Endpoint(_) => 4,
        }
    }

    /// Full message for stderr, including computed limits when known.
    pub fn report(&self) -> String {
        match self {
            CliError::Constraint {
                message,
                limits: Some(l),
            } => format!(
                "{message}\ncomputed limits: minimum {} clusters, maximum {} clusters",
                l.min_clusters, l.max_clusters
            ),
            other => other.to_string(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input(message.into())
    }

    pub fn read(path: &Path, err: std::io::Error) -> Self {
        CliError::Input(format!("cannot read {}: {err}", path.display()))
    }

    pub fn write(path: &Path, err: std::io::Error) -> Self {
        CliError::Internal(format!("cannot write {}: {err}", path.display()))
    }
}

impl From<TrajectoryError> for CliError {
    fn from(e: TrajectoryError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<PartitionError> for CliError {
    fn from(e: PartitionError) -> Self {
        match e {
            PartitionError::OutOfLimits { limits, .. } => CliError::Constraint {
                message: e.to_string(),
                limits: Some(limits),
            },
            PartitionError::Empty | PartitionError::Incompatible { .. } => CliError::Input(e.to_string()),
            PartitionError::InvalidPercentage { .. } | PartitionError::ZeroClusters => CliError::Constraint {
                message: e.to_string(),
                limits: None,
            },
        }
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        match e {
            PromptError::InconsistentLimits(_) => CliError::Constraint {
                message: e.to_string(),
                limits: None,
            },
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::Config(_) | LlmError::UnknownStub(_) => CliError::Input(e.to_string()),
            _ => CliError::Endpoint(e.to_string()),
        }
    }
}
