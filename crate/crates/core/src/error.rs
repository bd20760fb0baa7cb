use thiserror::Error;

/// Failure modes shared by every operation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },
    #[error("risk integral diverges")]
    DivergentIntegral,
    #[error("worst-case value is infinite")]
    WorstCaseInfinite,
    #[error("ambiguity budget is infeasible at this level")]
    InfeasibleBudget,
    #[error("too few tail samples: k_n = {k} for n = {n}")]
    TooFewTailSamples { k: usize, n: usize },
    #[error("degenerate tail: {0}")]
    DegenerateTail(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("window plan overruns data: stride {stride} * windows {windows} + length {length} > {available}")]
    PlanOverrun {
        stride: usize,
        windows: usize,
        length: usize,
        available: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn check_level(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("level {beta} outside (0, 1)")))
    }
}
