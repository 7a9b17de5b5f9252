use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the estimation and decomposition pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid event sequence: {0}")]
    InvalidSequence(String),

    #[error("kernel supports do not share an endpoint: {left} vs {right} (relative tolerance {tolerance})")]
    SupportMismatch { left: f64, right: f64, tolerance: f64 },

    #[error("model is not stationary (norm {0})")]
    NonStationary(f64),

    #[error("blow-up guard: expected {expected:.0} events exceeds cap {cap}")]
    BlowUp { expected: f64, cap: usize },

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("optimizer failed for {family}; best residue so far {best_residue}")]
    OptimizerFailure { family: String, best_residue: f64 },

    #[error("no stationary model found")]
    NoStationaryModel,

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn sequence(msg: impl Into<String>) -> Self {
        Error::InvalidSequence(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code used by the command line front end.
    ///
    /// 3 means no stationary model was found; every other failure is
    /// reported as invalid input (2).
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::NoStationaryModel => 3,
            _ => 2,
        }
    }
}
