use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what}: expected length {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("trace file line {line}, column `{column}`: {message}")]
    TraceParse {
        line: u64,
        column: String,
        message: String,
    },

    #[error("node `{0}` not present in trace file")]
    MissingNode(String),

    #[error("trace for node `{node}` has {actual} samples, need {expected}")]
    TraceLength {
        node: String,
        expected: usize,
        actual: usize,
    },

    #[error("{what} {value} outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("model decode failed: {0}")]
    Decode(String),

    #[error("model format version {found} not supported (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("replay memory holds {size} transitions, cannot sample {requested}")]
    Underfilled { size: usize, requested: usize },

    #[error("cannot step a terminal state")]
    TerminalStep,

    #[error("model file {} not found", .0.display())]
    MissingModel(std::path::PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by user input (bad config, bad flags), as
    /// opposed to failures while running.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::TomlDe(_))
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            actual,
        })
    }
}
