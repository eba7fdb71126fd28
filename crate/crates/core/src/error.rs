use thiserror::Error;

/// Errors raised by model fitting, acquisition evaluation and the optimization loop.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("training inputs {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },

    #[error("kernel matrix is not positive definite even with jitter {jitter:e}")]
    NonPositiveDefinite { jitter: f64 },

    #[error("posterior variance {variance:e} of output {output} is below the derivative floor")]
    DegeneratePoint { output: usize, variance: f64 },

    #[error("outer function returned a non-finite value")]
    OuterFunction,

    #[error("every restart collapsed onto an evaluated point")]
    AllDegenerate,

    #[error("problem has no known optimum value")]
    MissingOptimum,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
