//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("space of dimension {requested} is not resolvable on a {nx}x{ny} grid: {reason}")]
    Resolution {
        requested: usize,
        nx: usize,
        ny: usize,
        reason: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("potential kind `{0}` has no gradient available")]
    NoGradient(String),

    #[error("negative density {value} passed to the pressure law")]
    NegativeDensity { value: f64 },

    #[error("conjugate ascent did not converge after {iterations} iterations (gap bound {gap_bound:.3e})")]
    ConjugateNotConverged {
        iterations: usize,
        gap_bound: f64,
        last_iterate: Vec<f64>,
    },

    #[error(
        "density lost positivity at node ({i}, {j}) with value {value:.3e}; retry with dt <= {suggested_dt:.3e}"
    )]
    Positivity {
        i: usize,
        j: usize,
        value: f64,
        suggested_dt: f64,
    },

    #[error("mass matrix is not positive definite (min eigenvalue estimate {min_eigenvalue:.3e})")]
    MassMatrix { min_eigenvalue: f64 },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last ratio {last_ratio:.3e}, last change {last_change:.3e})")]
    FixedPoint {
        iterations: usize,
        last_ratio: f64,
        last_change: f64,
    },

    #[error("velocity blow-up: coefficient norm {norm:.3e} exceeds guard {guard:.3e} at t = {time}")]
    BlowUp { norm: f64, guard: f64, time: f64 },

    #[error("configuration error:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("artifact integrity: {0}")]
    Integrity(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures raised while advancing the solver.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::Positivity { .. }
                | Error::MassMatrix { .. }
                | Error::FixedPoint { .. }
                | Error::BlowUp { .. }
                | Error::NegativeDensity { .. }
                | Error::ConjugateNotConverged { .. }
        )
    }
}
