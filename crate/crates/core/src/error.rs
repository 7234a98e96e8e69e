use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LelongError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown variable `{name}` at line {line}, column {column}")]
    UnknownVariable { name: String, line: usize, column: usize },
    #[error("nonpositive {what} {value} at line {line}, column {column}")]
    NonPositive {
        what: &'static str,
        value: f64,
        line: usize,
        column: usize,
    },
    #[error("arity mismatch in {context}: expected {expected}, found {found}")]
    Arity {
        expected: usize,
        found: usize,
        context: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl LelongError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        LelongError::InvalidArgument(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        LelongError::Numerical(msg.into())
    }

    /// True for errors caused by bad input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, LelongError::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, LelongError>;
