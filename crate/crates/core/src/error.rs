use thiserror::Error;

use crate::market::UtilityFamily;
use crate::solvers::SolverOutcome;

/// Errors raised by the market model, the VI machinery and the solvers.
#[derive(Debug, Error)]
pub enum MarketError {
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("degenerate market: every Tullock effort is zero")]
    DegenerateMarket,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("buyer {buyer}: marginal-utility denominator {value:e} is not above the floor")]
    SingularDenominator { buyer: usize, value: f64 },

    #[error("fixed-price equilibrium solver stopped after {iterations} iterations (residual {residual:e})")]
    InnerSolverDiverged { iterations: usize, residual: f64 },

    #[error("solver reached its iteration cap ({} iterations) without converging", .0.trace.iterations)]
    MaxItersExceeded(Box<SolverOutcome>),

    #[error("Jacobi eigensolver stalled after {sweeps} sweeps (largest off-diagonal {off_diagonal:e})")]
    EigensolverStalled { sweeps: usize, off_diagonal: f64 },

    #[error("{method} needs {expected} utilities but buyer {buyer} has {found:?}")]
    WrongFamily {
        method: &'static str,
        expected: &'static str,
        buyer: usize,
        found: UtilityFamily,
    },

    #[error("brute-force search is limited to N*K <= 4, got {0}")]
    TooLarge(usize),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, MarketError>;
