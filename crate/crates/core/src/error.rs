use thiserror::Error;

use crate::dsl::ParseError;
use crate::model::ValidationReport;

pub type Result<T, E = CidError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CidError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("`{0}` is not a decision node")]
    NotADecision(String),
    #[error("`{outcome}` is not an outcome of `{node}`")]
    UnknownOutcome { node: String, outcome: String },
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("invalid model: {0}")]
    Invalid(ValidationReport),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("policy profile does not cover decision `{0}`")]
    IncompleteProfile(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("impossible evidence: the evidence has probability zero")]
    ImpossibleEvidence,
    #[error("resource cap exceeded: {what} needs {needed}, cap is {cap}")]
    ResourceCap { what: &'static str, needed: u128, cap: u128 },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("json error at {path}: {message}")]
    Json { path: String, message: String },
    #[error("invalid intervention: {0}")]
    Intervention(String),
    #[error("zoo: {0}")]
    Zoo(String),
    #[error("{0}")]
    Unsupported(String),
}

impl CidError {
    pub fn json(path: impl Into<String>, message: impl Into<String>) -> Self {
        CidError::Json { path: path.into(), message: message.into() }
    }

    pub fn is_resource_cap(&self) -> bool {
        matches!(self, CidError::ResourceCap { .. })
    }
}
