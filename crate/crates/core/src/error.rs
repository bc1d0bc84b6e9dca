use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mode {mode} out of range for a {num_modes}-mode space")]
    ModeOutOfRange { mode: usize, num_modes: usize },

    #[error("occupation {occupation} of mode {mode} exceeds n_max = {n_max}")]
    OccupationOutOfRange {
        mode: usize,
        occupation: usize,
        n_max: usize,
    },

    #[error("flat index {index} out of range for joint dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid Fock space: {0}")]
    InvalidSpace(String),

    #[error("invalid network parameters: {0}")]
    InvalidParams(String),

    #[error("superoperator needs ~{required} bytes, budget is {budget} bytes")]
    MemoryBudget { required: usize, budget: usize },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("null vector has vanishing trace; check basis or vectorization convention")]
    ZeroTrace,

    #[error("steady state is not positive semidefinite: min eigenvalue {min_eigenvalue:.3e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("time integration unstable at t = {time:.4} (norm {norm:.3e}); reduce dt")]
    Unstable { time: f64, norm: f64 },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("solver method {method} is not applicable: {reason}")]
    MethodNotApplicable { method: String, reason: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("empty mode selection")]
    EmptySelection,

    #[error("grid parse error at line {line}: {message}")]
    GridParse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
