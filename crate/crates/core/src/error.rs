use thiserror::Error;

/// Errors produced by the enhancement engine and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: {detail}")]
    Shape { context: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    SampleRate { expected: u32, actual: u32 },

    #[error("weights do not match configuration:\n  {}", .0.join("\n  "))]
    Weights(Vec<String>),

    #[error("non-finite values in {0} (corrupt weights?)")]
    NonFinite(&'static str),

    #[error("zero-energy reference signal")]
    ZeroReference,

    #[error("input too short: {0}")]
    TooShort(String),

    #[error("malformed weight container at byte {offset}: {msg}")]
    Format { offset: usize, msg: String },

    #[error("unsupported weight container version {0}")]
    UnsupportedVersion(u32),

    #[error("wav: {0}")]
    Wav(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status for the command-line tool: 2 for bad input, 3 for
    /// weight or configuration problems, 4 for numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite(_) => 4,
            Error::Config(_) | Error::Weights(_) | Error::Format { .. } | Error::UnsupportedVersion(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn shape(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { context, detail: detail.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
