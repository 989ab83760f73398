use thiserror::Error;

/// Errors produced by the adjustment and propagation routines.
///
/// Input errors describe a caller mistake (bad dimension, negative sigma,
/// empty data). Numerical errors describe a well-formed problem that cannot
/// be computed in double precision (rank deficiency, loss of positive
/// semidefiniteness).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input `{field}`: {reason}")]
    Input { field: &'static str, reason: String },

    #[error("dimension mismatch in `{field}`: expected {expected}, got {actual}")]
    Dimension {
        field: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("normal matrix is singular (condition number {condition:.3e}); deficient columns: {columns:?}")]
    Singular { condition: f64, columns: Vec<usize> },

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:.6e}, largest {max_eigenvalue:.6e}")]
    NotPositiveSemidefinite {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
}

impl Error {
    pub(crate) fn input(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Input {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn dimension(field: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            field,
            expected,
            actual,
        }
    }

    /// True for failures of the computation itself rather than of its inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::NotPositiveSemidefinite { .. }
        )
    }

    /// Name of the offending input field, when the error concerns one.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            Error::Input { field, .. } | Error::Dimension { field, .. } => Some(field),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
