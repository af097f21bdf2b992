use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The principal matrix logarithm does not exist.
    #[error("logarithm undefined: eigenvalue {re:e}{im:+e}i lies on the closed negative real axis")]
    LogDomain { re: f64, im: f64 },

    #[error("polar chart breakdown at t = {time}: q1 = {q1} is not positive")]
    ChartBreakdown { time: f64, q1: f64 },

    #[error("empty input: {0}")]
    Empty(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
