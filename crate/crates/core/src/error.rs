use thiserror::Error;

use crate::session::SessionState;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no candidate primitives for the current context")]
    NoContext,

    /// The observation buffer does not yet cover the requested window.
    #[error("insufficient observation: {observed_fraction:.3} of the mean duration observed, {required_fraction:.3} required")]
    InsufficientObservation {
        observed_fraction: f64,
        required_fraction: f64,
    },

    #[error("constraint infeasible: {0}")]
    Constraint(String),

    #[error("non-rigid transform: {0}")]
    NonRigid(String),

    #[error("unknown object: {0}")]
    UnknownObject(String),

    #[error("illegal transition: `{command}` is not allowed in state {state:?}")]
    IllegalTransition { state: SessionState, command: &'static str },

    #[error("execution active: {0}")]
    ActiveExecution(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("unsupported schema version {found} (supported: {supported})")]
    Version { found: u32, supported: u32 },

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CoreError {
    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CoreError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub(crate) fn json(context: &str, err: serde_json::Error) -> Self {
        CoreError::Parse {
            location: format!("{context}:{}:{}", err.line(), err.column()),
            message: err.to_string(),
        }
    }

    pub(crate) fn field(path: impl Into<String>, message: impl Into<String>) -> Self {
        CoreError::Parse {
            location: path.into(),
            message: message.into(),
        }
    }
}
