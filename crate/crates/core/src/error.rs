use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("no equation for `{agent}` takes {given} parameters")]
    ArityMismatch { agent: String, given: usize },
    #[error("agent identifier `{0}` is not ground")]
    NotGround(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("unknown range `{0}`")]
    UnknownRange(String),
    #[error("type error: {0}")]
    TypeError(String),
    #[error("unguarded recursion through `{0}`")]
    UnguardedRecursion(String),
    #[error("parallel structure changes along the path: {0}")]
    DynamicParallelism(String),
    #[error("state space was truncated; result would be unsound")]
    TruncatedInput,
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("invalid lasso: {0}")]
    InvalidLasso(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{line}:{column}: scope error: {message}")]
    Scope { line: usize, column: usize, message: String },
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
