use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("`{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Model(#[from] cda_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config { .. } => "config",
            CliError::Model(e) if is_input_error(e) => "invalid_parameter",
            CliError::Model(_) => "computation",
            CliError::Io { .. } | CliError::Csv { .. } => "io",
        }
    }

    /// 2 for rejected input, 1 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Model(e) if is_input_error(e) => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut body = json!({ "kind": self.kind(), "message": self.to_string() });
        match self {
            CliError::Config { key, .. } => body["key"] = json!(key),
            CliError::Io { path, .. } | CliError::Csv { path, .. } => body["path"] = json!(path),
            _ => {}
        }
        json!({ "error": body })
    }
}

fn is_input_error(e: &cda_core::Error) -> bool {
    matches!(
        e,
        cda_core::Error::InvalidParameter { .. }
            | cda_core::Error::PriceOutOfRange { .. }
            | cda_core::Error::BlockLayout { .. }
    )
}
