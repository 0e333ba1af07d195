use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum LabError {
    /// A function was evaluated outside of its domain.
    #[error("domain violation at {point:?}: {detail}")]
    Domain { point: Vec<f64>, detail: String },

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("variable v{index} out of range for dimension {dimension}")]
    VariableOutOfRange { index: usize, dimension: usize },

    #[error("parameter `{0}` is not bound")]
    UnboundParameter(String),

    #[error("index {index} out of range for dimension {dimension}")]
    IndexOutOfRange { index: usize, dimension: usize },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no convergence after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl LabError {
    pub fn domain(point: &[f64], detail: impl Into<String>) -> Self {
        LabError::Domain {
            point: point.to_vec(),
            detail: detail.into(),
        }
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        LabError::Precondition(msg.into())
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
