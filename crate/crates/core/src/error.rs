use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite numeric input: {0}")]
    NumericInput(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A fixed-step rollout produced a non-finite or runaway state.
    #[error("divergence at step {step}: {reason}")]
    Divergence { step: usize, reason: String },

    /// The adaptive integrator could not keep its step above the minimum.
    #[error("step size underflow at t = {t}: h = {h:e}")]
    Stiffness { t: f64, h: f64 },

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("training failed at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of inputs or files.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericInput(_)
                | Error::Divergence { .. }
                | Error::Stiffness { .. }
                | Error::Simulation(_)
                | Error::Training { .. }
        )
    }
}
