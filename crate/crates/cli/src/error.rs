use std::path::Path;

use thiserror::Error;
use vrtkit_core::adapter::AdapterError;
use vrtkit_core::builder::BuildError;
use vrtkit_core::table::TableError;
use vrtkit_stats::StatsError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Table {
        path: String,
        #[source]
        source: TableError,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}:{line}: {message}")]
    Input { path: String, line: usize, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn table(path: &Path, source: TableError) -> CliError {
        CliError::Table {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Table { .. } | CliError::Csv { .. } => "table",
            CliError::Input { .. } => "input",
            CliError::Config(_) => "config",
            CliError::Adapter(_) => "adapter",
            CliError::Build(_) => "build",
            CliError::Stats(_) => "stats",
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self, command: &str) -> String {
        serde_json::json!({
            "error": self.kind(),
            "command": command,
            "message": self.to_string(),
        })
        .to_string()
    }
}
