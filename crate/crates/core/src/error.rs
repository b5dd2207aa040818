use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("invalid structure: {}", .0.join("; "))]
    InvalidStructure(Vec<String>),

    #[error("observation at step {step} is impossible under the model")]
    ImpossibleObservation { step: usize },

    #[error("enumeration needs {required} configurations, bound is {bound}")]
    OracleTooLarge { required: f64, bound: f64 },

    #[error("planner needs {required} policies, bound is {bound}")]
    PlannerTooLarge { required: f64, bound: usize },

    #[error("inconsistent BMR inputs: {0}")]
    Inconsistent(String),

    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}
