//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A point lies outside the spatial domain [c, d].
    #[error("x = {x} outside domain [{c}, {d}]")]
    OutsideDomain { x: f64, c: f64, d: f64 },

    /// Domain endpoints or monotonicity-onset points violate 0 <= c < 1 < d <= 2.
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    /// A weight specification fails its structural requirements.
    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    /// Degeneracy exponent outside (0, 2); the explicit constants blow up.
    #[error("degeneracy exponent mu = {mu} outside (0, 2)")]
    InvalidExponent { mu: f64 },

    /// Local-exponent regression near the singularity could not be formed.
    #[error("weak/strong classification failed: {0}")]
    ClassificationFailure(String),

    /// Mesh construction parameters are unusable.
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    /// A node vector does not match the mesh.
    #[error("vector length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },

    /// Explicit time step violates the CFL bound.
    #[error("leapfrog step dt = {dt} exceeds stability bound {bound}")]
    Stability { dt: f64, bound: f64 },

    /// Iterative linear solve failed to reach its tolerance.
    #[error("linear solve did not converge: residual {residual} after {iterations} iterations")]
    LinearSolve { residual: f64, iterations: usize },

    /// Symmetric tridiagonal eigensolver failure.
    #[error("eigensolver failure: {0}")]
    Eigen(String),

    /// Observation of a trajectory with zero initial energy.
    #[error("observability ratio undefined: initial energy is zero")]
    UndefinedRatio,

    /// A stated precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// HUM conjugate gradient hit its iteration cap. Carries the residual
    /// history and the best iterate so callers can still inspect the
    /// (non-convergent) controls, e.g. in the strong-degeneration regime.
    #[error("HUM CG did not converge: residual {residual} after {iterations} iterations")]
    HumNonConvergence {
        residual: f64,
        iterations: usize,
        residual_history: Vec<f64>,
        best: Box<crate::hum::HumSolution>,
    },

    /// Experiment configuration rejected; all violations are listed.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
