//! Crate-wide error taxonomy.
//!
//! Every variant maps to exactly one stable wire code (see [`Error::code`]);
//! the HTTP layer serializes errors as `{code, message, detail}`.

use std::io;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("index out of bounds: {0}")]
    Bounds(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("codec error: {0}")]
    Codec(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("series mismatch: {0}")]
    SeriesMismatch(String),

    #[error("mixed series in one upload: {0}")]
    MixedSeries(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("busy: {0}")]
    Busy(String),

    #[error("integrity violation: {0}")]
    Integrity(String),

    #[error("executor failure: {0}")]
    Executor(String),

    #[error("unauthorized: {0}")]
    Unauthorized(String),

    #[error("startup failed: {0}")]
    Startup(String),

    #[error("i/o error: {context}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    /// Stable machine-readable code for this error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Bounds(_) => "bounds_error",
            Error::Argument(_) => "argument_error",
            Error::Codec(_) => "codec_error",
            Error::Parse(_) => "parse_error",
            Error::Geometry(_) => "geometry_error",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::SeriesMismatch(_) => "series_mismatch",
            Error::MixedSeries(_) => "mixed_series",
            Error::Unsupported(_) => "unsupported",
            Error::NotFound(_) => "not_found",
            Error::Conflict(_) => "conflict",
            Error::Busy(_) => "busy",
            Error::Integrity(_) => "integrity_error",
            Error::Executor(_) => "executor_error",
            Error::Unauthorized(_) => "unauthorized",
            Error::Startup(_) => "startup_error",
            Error::Io { .. } => "io_error",
        }
    }

    /// The variant payload without the kind prefix.
    pub fn detail(&self) -> String {
        match self {
            Error::Bounds(s)
            | Error::Argument(s)
            | Error::Codec(s)
            | Error::Parse(s)
            | Error::Geometry(s)
            | Error::GridMismatch(s)
            | Error::SeriesMismatch(s)
            | Error::MixedSeries(s)
            | Error::Unsupported(s)
            | Error::NotFound(s)
            | Error::Conflict(s)
            | Error::Busy(s)
            | Error::Integrity(s)
            | Error::Executor(s)
            | Error::Unauthorized(s)
            | Error::Startup(s) => s.clone(),
            Error::Io { context, source } => format!("{context}: {source}"),
        }
    }

    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> Error {
        let context = context.into();
        move |source| Error::Io { context, source }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
