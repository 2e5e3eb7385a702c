use thiserror::Error;

/// Errors produced by mesh construction, assembly and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error(
        "non-conforming mesh: edge between elements {first} and {second} of different regions \
         lies at ({x}, {y}), off the declared interface"
    )]
    NonConforming {
        first: usize,
        second: usize,
        x: f64,
        y: f64,
    },

    #[error("invalid material parameters: {0}")]
    InvalidParams(String),

    #[error("linear system is singular or severely ill-conditioned: {0}")]
    Singular(String),

    #[error(
        "iterative solve did not converge: {iterations} iterations, relative residual {residual:e}"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error(
        "deflated pressure Schur problem has a near-zero eigenvalue {eigenvalue:e}; \
         the discretization is unstable or the divergence matrix is rank deficient"
    )]
    UnstablePressure { eigenvalue: f64 },

    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
