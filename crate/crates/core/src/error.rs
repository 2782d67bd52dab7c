use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("edge ({from}, {to}) references a node outside 1..={nodes}")]
    EdgeOutOfRange { from: usize, to: usize, nodes: usize },

    #[error("index {index} out of range (bound {bound}) in {context}")]
    IndexOutOfRange {
        context: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is singular to working precision ({0})")]
    Singular(&'static str),

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("{solver} did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("Hamiltonian sign iteration broke down at iteration {iteration}: singular iterate")]
    SignBreakdown { iteration: usize },

    #[error("SDRE solve failed at state with |y|_inf = {state_norm:e}: {source}")]
    SdreFailure {
        state_norm: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("closed-loop simulation aborted: {0}")]
    Trajectory(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("too few usable points for a fit: {usable} (need at least 2)")]
    TooFewPoints { usable: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
