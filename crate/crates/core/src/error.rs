//! Crate-wide error type.
//!
//! Errors carry enough position information to act on: stream validation
//! failures list every violating cell, parse errors name the file and line,
//! and event-set rejections name the offending event index.

use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// A single cell- or row-level defect found while validating a frame matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Frame (row) index, 0-based.
    pub row: usize,
    /// Column index, 0-based; `None` for row-level defects.
    pub col: Option<usize>,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    /// Row does not have exactly one column per class.
    RowWidth { found: usize, expected: usize },
    /// Value is NaN or infinite.
    NonFinite,
    /// Probability outside `[0, 1]`.
    OutOfRange { value: f64 },
    /// Label entry other than 0 or 1.
    NotBinary { value: u8 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.kind, self.col) {
            (ViolationKind::RowWidth { found, expected }, _) => {
                write!(f, "row {}: row width {} != {}", self.row, found, expected)
            }
            (ViolationKind::NonFinite, Some(c)) => {
                write!(f, "row {}, column {}: non-finite value", self.row, c)
            }
            (ViolationKind::OutOfRange { value }, Some(c)) => {
                write!(f, "row {}, column {}: value {} outside [0, 1]", self.row, c, value)
            }
            (ViolationKind::NotBinary { value }, Some(c)) => {
                write!(f, "row {}, column {}: value {} is not 0 or 1", self.row, c, value)
            }
            // Cell-level kinds always carry a column; this arm is unreachable
            // through the validators.
            (kind, None) => write!(f, "row {}: {:?}", self.row, kind),
        }
    }
}

pub(crate) fn render_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("  {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid label space: {0}")]
    InvalidLabelSpace(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "stream '{video_id}' failed validation ({} violation{}):\n{}",
        violations.len(),
        if violations.len() == 1 { "" } else { "s" },
        render_violations(violations)
    )]
    InvalidStream {
        video_id: String,
        violations: Vec<Violation>,
    },

    #[error("invalid event set '{video_id}': {reason}")]
    InvalidEventSet { video_id: String, reason: String },

    #[error("dimension mismatch in {context}: {detail}")]
    DimensionMismatch { context: String, detail: String },

    #[error("empty input in {0}: at least one frame is required")]
    EmptyInput(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    FileFormat { path: String, message: String },

    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
