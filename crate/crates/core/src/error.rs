use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error("agent {agent} has more than one state at t = {timestamp}s")]
    DuplicateState { agent: String, timestamp: f64 },

    #[error("invalid trajectory for agent {agent}: {reason}")]
    InvalidTrajectory { agent: String, reason: String },

    #[error("homography is singular (|det H| = {0:e})")]
    SingularHomography(f64),

    #[error("sampling is not uniform (period {period}s, deviation {deviation}s); downsample first")]
    NonUniformSpacing { period: f64, deviation: f64 },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("state of agent {agent} at t = {timestamp}s has no velocity; run smoothing first")]
    MissingVelocity { agent: String, timestamp: f64 },

    #[error("length mismatch: {left} vs {right} points")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{module}: {context}: {source}")]
    Stage {
        module: &'static str,
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// Attaches pipeline-stage context to an error.
    pub fn in_stage(self, module: &'static str, context: impl Into<String>) -> Self {
        Error::Stage {
            module,
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => ErrorKind::Config,
            Error::Parse { .. }
            | Error::Read { .. }
            | Error::EmptyDataset(_)
            | Error::DuplicateState { .. }
            | Error::InvalidTrajectory { .. }
            | Error::SingularHomography(_)
            | Error::NonUniformSpacing { .. }
            | Error::Insufficient(_)
            | Error::MissingVelocity { .. }
            | Error::LengthMismatch { .. } => ErrorKind::Data,
            Error::Write { .. } | Error::Serde(_) => ErrorKind::Internal,
            Error::Stage { source, .. } => source.kind(),
        }
    }
}
