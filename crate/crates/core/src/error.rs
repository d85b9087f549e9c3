use thiserror::Error;

use crate::model::ValidationReport;
use crate::rootfind::RootError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("invalid parameters: {0}")]
    Invalid(ValidationReport),
    #[error("price must be positive, got {x}")]
    NonPositivePrice { x: f64 },
    #[error("abandonment root bracket failed ({context}): {source}")]
    Bracket {
        context: &'static str,
        #[source]
        source: RootError,
    },
    #[error("coefficient cross-check failed: {what} residual {residual:e}")]
    Inconsistent { what: &'static str, residual: f64 },
    #[error(
        "no ordered (cancel, entry) pair solves the pasting system from {attempts} starting points"
    )]
    NoInteriorSolution { attempts: usize },
}

impl SolveError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            SolveError::Invalid(report) if report.has_infinite_value() => "E_INFINITE_VALUE",
            SolveError::Invalid(_) => "E_VALIDATION",
            SolveError::NonPositivePrice { .. } => "E_PRICE",
            SolveError::Bracket { .. } => "E_BRACKET",
            SolveError::Inconsistent { .. } => "E_INCONSISTENT",
            SolveError::NoInteriorSolution { .. } => "E_NO_INTERIOR",
        }
    }

    pub fn is_validation(&self) -> bool {
        matches!(self, SolveError::Invalid(_))
    }
}
