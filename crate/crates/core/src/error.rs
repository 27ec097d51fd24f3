use std::path::PathBuf;

/// Errors produced anywhere in the onset detection pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("stream contains no samples")]
    EmptyStream,

    #[error("malformed header: {0:?}")]
    MalformedHeader(String),

    #[error("line {line}: not a number: {content:?}")]
    NonNumericLine { line: usize, content: String },

    #[error("audio too short: need at least {needed} samples, got {got}")]
    AudioTooShort { needed: usize, got: usize },

    #[error("invalid band range: fmin={fmin_hz} Hz, fmax={fmax_hz} Hz, nyquist={nyquist_hz} Hz, bands/octave={bands_per_octave}")]
    InvalidBandRange {
        fmin_hz: f64,
        fmax_hz: f64,
        nyquist_hz: f64,
        bands_per_octave: usize,
    },

    #[error("too few frames: need at least {needed}, got {got}")]
    TooFewFrames { needed: usize, got: usize },

    #[error("sequence too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("indices are not strictly increasing")]
    NonMonotonicInput,

    #[error("signal is empty")]
    EmptySignal,

    #[error("list is empty")]
    EmptyList,

    #[error("parameter grid is empty")]
    EmptyGrid,

    #[error("manifest line {line}: {reason}")]
    ManifestMalformed { line: usize, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Attach the offending file to an error raised while processing it.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        match self {
            e @ (Error::FileNotFound(_) | Error::Io { .. } | Error::InFile { .. }) => e,
            e => Error::InFile {
                path: path.into(),
                source: Box::new(e),
            },
        }
    }

    /// True for failures of the file system rather than of the data or configuration.
    pub fn is_io(&self) -> bool {
        match self {
            Error::FileNotFound(_) | Error::Io { .. } => true,
            Error::InFile { source, .. } => source.is_io(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
