use thiserror::Error;

/// Errors raised anywhere in the discretization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interface: {0}")]
    InvalidInterface(String),

    #[error("degenerate triangle (area {area:e})")]
    DegenerateTriangle { area: f64 },

    #[error("interface crosses element boundary more than twice; refine the mesh")]
    MultipleCrossings,

    #[error("element {element}: constraint null space has dimension {nullity}, expected {expected}")]
    RankDeficient {
        element: usize,
        nullity: usize,
        expected: usize,
    },

    #[error("element {element}: piecewise Gram condition number {condition:e} exceeds limit")]
    IllConditioned { element: usize, condition: f64 },

    #[error("element {element}: weak-gradient Gram matrix is singular")]
    SingularGram { element: usize },

    #[error("conflicting constraint on dof {dof}: {first} vs {second}")]
    InconsistentConstraint { dof: usize, first: f64, second: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("CG did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("non-positive error value {value:e} at position {index}")]
    NonPositiveError { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
