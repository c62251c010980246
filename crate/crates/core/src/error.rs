use std::fmt;

/// Machine-readable failure codes surfaced by every operation in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    UnsupportedTask,
    UnsupportedCapability,
    NoEdits,
    EmptyGeneration,
    TokenAlignment,
    CorruptionNoop,
    TooManyPlayers,
    EmptyExplanation,
    NonFiniteScore,
    NoPairs,
    NoData,
    DegenerateSample,
    ShapeMismatch,
    NoCounterfactuals,
    SamplingExhausted,
    ConstraintUnsatisfiable,
    InvalidRow,
    InvalidInstance,
    FetchFailed,
    NoSiblings,
    Transport,
    Endpoint,
    Config,
    Io,
    Parse,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::UnsupportedTask => "UNSUPPORTED_TASK",
            ErrorCode::UnsupportedCapability => "UNSUPPORTED_CAPABILITY",
            ErrorCode::NoEdits => "NO_EDITS",
            ErrorCode::EmptyGeneration => "EMPTY_GENERATION",
            ErrorCode::TokenAlignment => "TOKEN_ALIGNMENT",
            ErrorCode::CorruptionNoop => "CORRUPTION_NOOP",
            ErrorCode::TooManyPlayers => "TOO_MANY_PLAYERS",
            ErrorCode::EmptyExplanation => "EMPTY_EXPLANATION",
            ErrorCode::NonFiniteScore => "NON_FINITE_SCORE",
            ErrorCode::NoPairs => "NO_PAIRS",
            ErrorCode::NoData => "NO_DATA",
            ErrorCode::DegenerateSample => "DEGENERATE_SAMPLE",
            ErrorCode::ShapeMismatch => "SHAPE_MISMATCH",
            ErrorCode::NoCounterfactuals => "NO_COUNTERFACTUALS",
            ErrorCode::SamplingExhausted => "SAMPLING_EXHAUSTED",
            ErrorCode::ConstraintUnsatisfiable => "CONSTRAINT_UNSATISFIABLE",
            ErrorCode::InvalidRow => "INVALID_ROW",
            ErrorCode::InvalidInstance => "INVALID_INSTANCE",
            ErrorCode::FetchFailed => "FETCH_FAILED",
            ErrorCode::NoSiblings => "NO_SIBLINGS",
            ErrorCode::Transport => "TRANSPORT",
            ErrorCode::Endpoint => "ENDPOINT",
            ErrorCode::Config => "CONFIG",
            ErrorCode::Io => "IO",
            ErrorCode::Parse => "PARSE",
        }
    }

    /// True for failures that originate in a model endpoint rather than in
    /// local data or configuration.
    pub fn is_endpoint_failure(self) -> bool {
        matches!(
            self,
            ErrorCode::Transport
                | ErrorCode::Endpoint
                | ErrorCode::EmptyGeneration
                | ErrorCode::TokenAlignment
                | ErrorCode::CorruptionNoop
                | ErrorCode::UnsupportedCapability
        )
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{code}: {message}")]
pub struct Error {
    code: ErrorCode,
    message: String,
}

impl Error {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Error {
            code,
            message: message.into(),
        }
    }

    pub fn code(&self) -> ErrorCode {
        self.code
    }

    pub fn message(&self) -> &str {
        &self.message
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::new(ErrorCode::Io, err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::new(ErrorCode::Parse, err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! bail {
    ($code:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::new($crate::error::ErrorCode::$code, format!($($arg)*)))
    };
}
pub(crate) use bail;
