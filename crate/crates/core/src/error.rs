use thiserror::Error;

/// Errors raised by the numerical layers and the run driver.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: non-finite vectors, mismatched grids, out-of-range indices.
    #[error("input error: {0}")]
    Input(String),
    /// A tabulated model was queried outside its table.
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid configuration or a violated precondition on parameters.
    #[error("config error: {0}")]
    Config(String),
    /// An iterative solve did not converge. `history` carries the residual
    /// (or iterate change) log of the failed solve.
    #[error("numerical error: {message}")]
    Numerical { message: String, history: Vec<f64> },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn numerical(message: impl Into<String>, history: Vec<f64>) -> Self {
        Error::Numerical {
            message: message.into(),
            history,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
