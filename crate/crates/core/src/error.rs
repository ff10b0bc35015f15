use thiserror::Error;

use crate::mdp::ValidationResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid MDP: {0}")]
    InvalidMdp(ValidationResult),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input is not a probability vector (sum {sum}, min entry {min})")]
    NotOnSimplex { sum: f64, min: f64 },

    #[error("gradient undefined at boundary: entry {index} is {value}")]
    GradientDomain { index: usize, value: f64 },

    #[error("multiplier bisection failed to bracket: sums {low_sum} at {low}, {high_sum} at {high}")]
    NotBracketed {
        low: f64,
        high: f64,
        low_sum: f64,
        high_sum: f64,
    },

    #[error("simplex constraint not met after bisection: |sum - 1| = {residual}")]
    SimplexConstraint { residual: f64 },

    #[error("singular linear system (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("value iteration did not converge in {iterations} sweeps (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("bad regularizer spec `{token}`: {reason}")]
    RegularizerSpec { token: String, reason: String },

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by floating-point breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem { .. }
                | Error::MaxIterations { .. }
                | Error::NotBracketed { .. }
                | Error::SimplexConstraint { .. }
        )
    }
}
