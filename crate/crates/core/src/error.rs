//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("point location failed for ({x}, {y})")]
    LocationFailure { x: f64, y: f64 },

    #[error("velocity field produced a non-finite value at vertex {vertex}")]
    Propagation { vertex: usize },

    #[error("segment tracing exceeded {max_pieces} pieces (tolerance failure)")]
    TracingCycle { max_pieces: usize },

    #[error("singular flow: image of triangle {triangle} has signed area {area:.3e}")]
    SingularFlow { triangle: usize, area: f64 },

    #[error("coefficient must be uniformly positive, sampled {value:.3e} at ({x}, {y})")]
    InvalidCoefficient { value: f64, x: f64, y: f64 },

    #[error("conjugate gradients did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence {
        residual: f64,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("matrix numerically singular at pivot {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("linear solve residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    SolveResidual { residual: f64, tol: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
