use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// A state left the admissible region of a model.
    #[error("domain error: {coordinate} = {value} outside admissible region ({detail})")]
    Domain {
        coordinate: String,
        value: f64,
        detail: String,
    },

    #[error("no excitation: {0}")]
    NoExcitation(String),

    #[error("non-finite value in `{channel}` at t = {time}: state snapshot {snapshot:?}")]
    NonFinite {
        channel: String,
        time: f64,
        snapshot: Vec<f64>,
    },

    #[error("empty metric window: {0}")]
    EmptyWindow(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors that stem from the user's configuration rather than the run itself.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
