use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A single failed field check, carried by validation errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn join_fields(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

fn row_prefix(row: &Option<usize>) -> String {
    match row {
        Some(r) => format!("row {r}: "),
        None => String::new(),
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}, field `{field}`: {message}")]
    Malformed {
        row: usize,
        field: String,
        message: String,
    },

    #[error("{}validation failed: {}", row_prefix(.row), join_fields(.errors))]
    Validation {
        row: Option<usize>,
        errors: Vec<FieldError>,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("duplicate record id `{0}`")]
    DuplicateId(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("invalid generator config: {0}")]
    Generator(String),

    #[error("feature `{0}` has zero variance in the training data")]
    ZeroVariance(String),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("record `{0}` has no label")]
    Unlabeled(String),

    #[error("optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("no grid cell could be fitted: {0}")]
    GridExhausted(String),

    #[error("no calibration entry for leaf {0}")]
    MissingLeaf(u64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("unsupported bundle schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("inconsistent bundle: {0}")]
    Inconsistent(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Field-level messages when this is a validation failure.
    pub fn field_errors(&self) -> Option<&[FieldError]> {
        match self {
            Error::Validation { errors, .. } => Some(errors),
            _ => None,
        }
    }
}
