use std::fmt;

/// Errors produced by the solvers, samplers and file readers in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Empirical mass sits on an observation the model assigns zero probability.
    #[error("observation {symbol} is impossible under the current model")]
    ImpossibleObservation { symbol: usize },

    /// An observation sequence has zero likelihood under the current model.
    #[error("observation sequence has zero likelihood under the current model")]
    ImpossibleSequence,

    /// The dual minimizer ran out of iterations. Carries the best iterate seen.
    #[error("solver did not converge after {iterations} iterations (gradient inf-norm {grad_norm:e})")]
    NotConverged {
        weights: Vec<f64>,
        grad_norm: f64,
        iterations: usize,
    },

    #[error("absolute continuity violated at index {index}: p > 0 but q = 0")]
    AbsoluteContinuity { index: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn dim(msg: impl fmt::Display) -> Self {
        Error::Dimension(msg.to_string())
    }

    pub(crate) fn invalid(msg: impl fmt::Display) -> Self {
        Error::InvalidArgument(msg.to_string())
    }

    /// Wraps `self` with a description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Follows `Context` wrappers down to the originating error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
