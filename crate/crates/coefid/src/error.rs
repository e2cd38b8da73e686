use thiserror::Error;

/// Unified error type for the whole toolkit.
///
/// Variants split into two families: input/validation problems (bad polygons,
/// malformed files, inconsistent configs) and numerical failures (solver
/// breakdown, degenerate observation, diverging fixed point). The CLI maps the
/// former to exit code 1 and the latter to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("mesh generation failed: {0}")]
    MeshingFailure(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("malformed mesh file: {0}")]
    MeshFormat(String),

    #[error("invalid coefficient: {name} = {value} at ({x}, {y})")]
    InvalidCoefficient {
        name: &'static str,
        value: f64,
        x: f64,
        y: f64,
    },

    #[error("observation point ({x}, {y}) lies outside the domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix flagged symmetric violates symmetry (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error(
        "conjugate gradients did not converge in {iterations} iterations \
         (residual {residual:e}, target {target:e})"
    )]
    NoConvergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("system matrix is not positive definite at step {step} (mass coefficient {shift:e})")]
    IndefiniteSystem { step: usize, shift: f64 },

    #[error(
        "degenerate observation at step {step}: |r.w| = {value:e} is not above \
         the threshold {threshold:e}"
    )]
    DegenerateObservation {
        step: usize,
        value: f64,
        threshold: f64,
    },

    #[error("transform degenerate at step {step}: {message}")]
    TransformDegenerate { step: usize, message: String },

    #[error(
        "fixed-point iteration at step {step} did not converge within {} iterations; \
         iterate history {history:?}",
        history.len()
    )]
    FixedPointDiverged { step: usize, history: Vec<f64> },

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach a 1-based time-step index to step-scoped numerical errors.
    pub(crate) fn at_step(self, at: usize) -> Error {
        match self {
            Error::IndefiniteSystem { shift, .. } => Error::IndefiniteSystem { step: at, shift },
            Error::DegenerateObservation {
                value, threshold, ..
            } => Error::DegenerateObservation {
                step: at,
                value,
                threshold,
            },
            Error::TransformDegenerate { message, .. } => {
                Error::TransformDegenerate { step: at, message }
            }
            Error::FixedPointDiverged { history, .. } => {
                Error::FixedPointDiverged { step: at, history }
            }
            other => other,
        }
    }

    /// Exit code for the CLI: 1 for validation problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoConvergence { .. }
            | Error::IndefiniteSystem { .. }
            | Error::DegenerateObservation { .. }
            | Error::TransformDegenerate { .. }
            | Error::FixedPointDiverged { .. } => 2,
            _ => 1,
        }
    }
}
