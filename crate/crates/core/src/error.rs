// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch: expected {expected} frames, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("run [{start}, {end}] is out of range for a track of {frames} frames")]
    RunOutOfRange { start: usize, end: usize, frames: usize },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("{path}: bad magic {found:?}, expected \"CMSG\"")]
    BadMagic { path: PathBuf, found: [u8; 4] },

    #[error("{path}: unsupported feature file version {found}, expected {expected}")]
    VersionMismatch { path: PathBuf, found: u32, expected: u32 },

    #[error("{path}: truncated file, expected {expected} bytes, found {actual}")]
    Truncated { path: PathBuf, expected: u64, actual: u64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 2 for anything touching files or their formats, 3 for inputs the
    /// algorithms cannot work with.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::BadMagic { .. }
            | Error::VersionMismatch { .. }
            | Error::Truncated { .. }
            | Error::Parse { .. }
            | Error::Io { .. }
            | Error::Json(_)
            | Error::Config(_) => 2,
            Error::InvalidInput(_)
            | Error::LengthMismatch { .. }
            | Error::RunOutOfRange { .. }
            | Error::Infeasible(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_same_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}
