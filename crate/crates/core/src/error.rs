use std::path::PathBuf;

/// Errors produced anywhere in the inspection toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("pitch {pitch} rad is too close to the Euler-rate singularity")]
    Singularity { pitch: f64 },
    #[error("simulation diverged at t = {time:.4} s (|sigma| = {sigma:.3e})")]
    Divergence { time: f64, sigma: f64 },
    #[error("degenerate histogram: {0}")]
    DegenerateHistogram(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("image format: {0}")]
    Image(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad or missing input rather than a failing
    /// computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Domain(_)
            | Error::DimensionMismatch(_)
            | Error::Image(_)
            | Error::Io { .. } => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
