use thiserror::Error;

/// Errors raised by the geometric and numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("group element is at rotation angle {angle} rad, too close to the cut locus")]
    LogNearCutLocus { angle: f64 },

    #[error("finite-difference step {step} would leave the convex neighbourhood (angle {angle} rad)")]
    StepUnderflow { step: f64, angle: f64 },

    #[error("trajectory left the convex neighbourhood of the obstacle at t = {t}")]
    CutLocusDuringIntegration { t: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("shooting did not converge after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("grid has {nodes} intervals, at least 16 are required")]
    GridTooCoarse { nodes: usize },

    #[error("variation field violates the endpoint conditions: {0}")]
    EndpointViolation(String),

    #[error("invalid group model: {0}")]
    InvalidModel(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
