use thiserror::Error;

/// Errors produced by scenario validation, the analyses and the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("state space of {states} states exceeds the cap of {cap}")]
    StateSpaceTooLarge { states: usize, cap: usize },

    #[error("stationary distribution failed to converge (residual {residual:e})")]
    NoConvergence { residual: f64 },

    #[error("series does not converge: spectral radius estimate {0} is too close to 1")]
    IllConditioned(f64),

    #[error("matrix is singular")]
    Singular,

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("could not parse scenario: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
