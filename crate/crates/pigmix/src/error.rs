use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Process exit codes of the `pigmix` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    /// Bad command line (also used by clap).
    pub const USAGE: i32 = 2;
    /// Malformed or inconsistent input data.
    pub const INVALID_INPUT: i32 = 3;
    /// A required artifact (model, LUT, corpus) is absent.
    pub const NOT_READY: i32 = 4;
    pub const IO: i32 = 5;
    pub const DIVERGED: i32 = 6;
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: missing entries: {}", path.display(), format_missing(entries))]
    MissingEntries { path: PathBuf, entries: Vec<MissingRow> },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] pigmix_core::Error),

    #[error("not ready: {0}")]
    NotReady(String),

    #[error("training diverged at epoch {epoch}; last good weights written to {}", saved.display())]
    Diverged { epoch: u64, saved: PathBuf },

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Internal(String),
}

/// One absent `(pigment, quantity, role)` row of a pigment file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MissingRow {
    pub pigment: u8,
    pub quantity_ml: f64,
    pub role: &'static str,
}

fn format_missing(rows: &[MissingRow]) -> String {
    rows.iter()
        .map(|r| format!("({}, {}, {})", r.pigment, r.quantity_ml, r.role))
        .collect::<Vec<_>>()
        .join(", ")
}

impl AppError {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        AppError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn format(path: impl AsRef<Path>, message: impl Into<String>) -> Self {
        AppError::Format {
            path: path.as_ref().to_path_buf(),
            message: message.into(),
        }
    }

    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            AppError::Io { .. } => "io",
            AppError::Parse { .. } => "parse",
            AppError::MissingEntries { .. } => "missing_entries",
            AppError::Format { .. } => "format",
            AppError::Core(_) => "invalid_input",
            AppError::NotReady(_) => "not_ready",
            AppError::Diverged { .. } => "diverged",
            AppError::Usage(_) => "usage",
            AppError::Internal(_) => "internal",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Io { .. } => exit::IO,
            AppError::Parse { .. } | AppError::MissingEntries { .. } | AppError::Format { .. } | AppError::Core(_) => {
                exit::INVALID_INPUT
            }
            AppError::NotReady(_) => exit::NOT_READY,
            AppError::Diverged { .. } => exit::DIVERGED,
            AppError::Usage(_) => exit::USAGE,
            AppError::Internal(_) => exit::INTERNAL,
        }
    }

    /// The JSON document printed on stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut err = serde_json::json!({
            "code": self.code(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let AppError::MissingEntries { entries, .. } = self {
            err["missing"] = serde_json::to_value(entries).unwrap_or_default();
        }
        serde_json::json!({ "schema_version": crate::wire::SCHEMA_VERSION, "error": err })
    }
}

pub type AppResult<T> = Result<T, AppError>;

pub(crate) fn read_to_string(path: &Path) -> AppResult<String> {
    std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub(crate) fn read_bytes(path: &Path) -> AppResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| AppError::io(path, e))
}

/// Write through a sibling temporary file so readers never see a torn file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| AppError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| AppError::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> AppResult<()> {
    std::fs::create_dir_all(path).map_err(|e| AppError::io(path, e))
}
