use thiserror::Error;

/// Errors raised by model construction, elimination and the oracle.
#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum Error {
    #[error("division by an identically zero function")]
    DivisionByZeroFunction,
    #[error("undefined at {0}: a denominator evaluates to zero")]
    UndefinedAt(String),
    #[error("self-loop of state `{0}` is identically 1")]
    IdenticallyOneSelfLoop(String),
    #[error("empty model: {0}")]
    EmptyModel(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("duplicate state `{0}`")]
    DuplicateState(String),
    #[error("illegal reconfiguration: {0}")]
    IllegalReconfiguration(String),
    #[error("reachability requirement violated: {0}")]
    RequirementViolated(String),
    #[error("valuation is not graph-preserving: {0}")]
    NotGraphPreserving(String),
    #[error("singular linear system")]
    SingularSystem,
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
