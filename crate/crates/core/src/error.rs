use thiserror::Error;

use crate::svm::SvmModel;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A precondition of an operation was not met.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("model mode mismatch: expected {expected} model")]
    Mode { expected: &'static str },

    /// The simplex hit its pivot cap; `objective` is the value at the last basis.
    #[error("LP solver exceeded {iterations} pivots (objective at last basis {objective})")]
    LpIterationLimit {
        iterations: usize,
        objective: f64,
        solution: Vec<f64>,
    },

    /// SMO ran out of passes; the best-so-far model is attached.
    #[error("SMO did not converge: max KKT violation {max_violation:.3e}")]
    SvmNotConverged {
        model: Box<SvmModel>,
        max_violation: f64,
    },

    #[error("dual problem is unbounded (hard margin on non-separable kernel matrix)")]
    Unbounded,

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for errors that signal an iterative solver gave up.
    pub fn is_convergence(&self) -> bool {
        matches!(
            self,
            Error::LpIterationLimit { .. }
                | Error::SvmNotConverged { .. }
                | Error::Unbounded
                | Error::Divergence { .. }
        )
    }

    /// Short stable identifier, used in report rows.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Contract(_) => "contract",
            Error::Parse { .. } => "parse",
            Error::Mode { .. } => "mode",
            Error::LpIterationLimit { .. } => "lp_iteration_limit",
            Error::SvmNotConverged { .. } => "svm_not_converged",
            Error::Unbounded => "unbounded",
            Error::Divergence { .. } => "divergence",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::contract(format!(
            "{what} contains a non-finite value"
        )))
    }
}
