use thiserror::Error;

/// Failure modes of the numerical integrators. These signal that the run
/// itself is not trustworthy, as opposed to a bad configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegratorFailure {
    #[error("state norm drifted by {drift:.3e} (limit {limit:.1e}); dt is too coarse")]
    NormDrift { drift: f64, limit: f64 },
    #[error("trace drifted by {drift:.3e} (limit {limit:.1e}); dt is too coarse")]
    TraceDrift { drift: f64, limit: f64 },
    #[error("density matrix eigenvalue {value:.3e} at t = {time:.4e} s is below {limit:.1e}")]
    NegativeEigenvalue { value: f64, time: f64, limit: f64 },
    #[error("non-finite value encountered at t = {time:.4e} s")]
    NonFinite { time: f64 },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode index {mode} out of range for a basis with {modes} modes")]
    InvalidMode { mode: usize, modes: usize },

    #[error("occupation {occupations:?} is not representable in this basis: {reason}")]
    InvalidOccupation {
        occupations: Vec<usize>,
        reason: String,
    },

    #[error("amplitude {amplitude:.3e} lies outside the excitation sector (truncation leakage)")]
    SectorLeakage { amplitude: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("resonator {index} has zero detuning from the bus; the effective frame is undefined")]
    ZeroDetuning { index: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("integrator failure: {0}")]
    Integrator(#[from] IntegratorFailure),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures raised by the integrators' runtime invariant checks.
    pub fn is_integrator_failure(&self) -> bool {
        matches!(self, Error::Integrator(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
