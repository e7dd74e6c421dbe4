use thiserror::Error;

/// Errors produced by parsing, validation, simulation, and the pipeline.
///
/// Everything except `Internal` describes a problem with user-provided
/// input. `Internal` means a pipeline self-check failed and indicates a
/// bug in this crate, not in the input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}:{col}: {msg}")]
    Syntax {
        path: String,
        line: usize,
        col: usize,
        msg: String,
    },

    #[error("combinational cycle through: {}", members.join(", "))]
    CombinationalCycle { members: Vec<String> },

    #[error("wire `{name}` has no assign")]
    DanglingWire { name: String },

    #[error("reg `{name}` has no update")]
    RegWithoutUpdate { name: String },

    #[error("{path}: row {row}: {msg}")]
    TraceFormat {
        path: String,
        row: usize,
        msg: String,
    },

    #[error("{path}: {msg}")]
    FileFormat { path: String, msg: String },

    #[error("unknown source signal `{name}`")]
    UnknownSource { name: String },

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("{path}: {err}")]
    Io { path: String, err: std::io::Error },
}

impl Error {
    pub fn syntax(path: &str, line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Syntax {
            path: path.to_string(),
            line,
            col,
            msg: msg.into(),
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            err,
        }
    }

    /// True for failures of pipeline self-checks (bugs in this crate),
    /// as opposed to bad user input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Internal(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
