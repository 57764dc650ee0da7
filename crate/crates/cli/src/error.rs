use std::path::PathBuf;

use review_funnel::Error as CoreError;

/// Failure modes, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("invalid arguments: {0}")]
    Usage(String),

    #[error("recall ratio {ratio} is below the floor {floor}")]
    BelowFloor { ratio: f64, floor: f64 },

    #[error("corpus hash mismatch: {left} vs {right}")]
    HashMismatch { left: String, right: String },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::BelowFloor { .. } => 1,
            CliError::Config { .. } | CliError::Usage(_) => 2,
            CliError::Core { source, .. } if is_config_error(source) => 2,
            CliError::HashMismatch { .. } | CliError::Core { .. } | CliError::Io { .. } => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn core(context: impl Into<String>) -> impl FnOnce(CoreError) -> CliError {
        let context = context.into();
        move |source| CliError::Core { context, source }
    }
}

fn is_config_error(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::Config { .. }
            | CoreError::InvalidThreshold { .. }
            | CoreError::Parse { .. }
            | CoreError::BudgetExceedsCorpus { .. }
            | CoreError::DuplicateId { .. }
            | CoreError::DimensionMismatch { .. }
            | CoreError::ZeroVector
            | CoreError::MissingGroundTruth(_)
    )
}
