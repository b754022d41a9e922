// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: values are {values_rows}x{values_cols}, mask is {mask_rows}x{mask_cols}")]
    DimensionMismatch {
        values_rows: usize,
        values_cols: usize,
        mask_rows: usize,
        mask_cols: usize,
    },

    #[error("non-finite observed value at row {row}, time {time}")]
    NonFinite { row: usize, time: usize },

    #[error("series too short: need at least {min} time points, got {n}")]
    TooShort { n: usize, min: usize },

    /// The penalty is at least the largest row norm of the CUSUM matrix, so
    /// the penalised problem is maximised by the zero vector.
    #[error("degenerate penalty: lambda = {lambda} >= max row norm {two_to_inf_norm}")]
    DegeneratePenalty { lambda: f64, two_to_inf_norm: f64 },

    #[error("soft-thresholded update vanished at iteration {iteration}")]
    ZeroVector { iteration: usize },

    /// No row has observations on both sides of any split.
    #[error("every MissCUSUM entry is invalid: no row is observed on both sides of any split")]
    AllInvalid,

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Short machine-readable tag used in CLI error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::TooShort { .. } => "too_short",
            Error::DegeneratePenalty { .. } => "degenerate_penalty",
            Error::ZeroVector { .. } => "zero_vector",
            Error::AllInvalid => "all_invalid",
            Error::Parse { .. } => "parse_error",
            Error::Io(_) => "io_error",
        }
    }

    /// True for failures of the estimator itself rather than of its inputs.
    pub fn is_algorithmic(&self) -> bool {
        matches!(
            self,
            Error::DegeneratePenalty { .. } | Error::ZeroVector { .. } | Error::AllInvalid
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
