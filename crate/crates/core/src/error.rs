use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("typical window is empty for N={n}, eta={eta}: [{lo}, {hi}]; widen the window or disable windowing")]
    EmptyWindow { n: u32, eta: f64, lo: u32, hi: u32 },

    #[error("exhaustive search needs {count} labelings, budget is {budget}")]
    BudgetExceeded { count: f64, budget: u64 },

    #[error("instance too large for {mode}: {detail}")]
    TooLarge { mode: &'static str, detail: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("linear program is {0}")]
    Lp(&'static str),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
