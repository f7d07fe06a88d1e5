use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("trace error: {0}")]
    Trace(String),
    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),
    #[error("invalid value `{value}` for parameter `{parameter}`: {reason}")]
    InvalidValue {
        parameter: String,
        value: String,
        reason: String,
    },
    #[error("fairness index undefined for all-zero or empty input")]
    UndefinedFairness,
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
