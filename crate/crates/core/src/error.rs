use std::path::PathBuf;

use thiserror::Error;

use crate::dsl::ParseError;
use crate::model::ValidationReport;
use crate::session::SessionState;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Parse(#[from] ParseError),

    #[error("invalid knowledge base: {}", summarize(.0))]
    InvalidKb(ValidationReport),

    #[error("unknown knowledge base `{0}`")]
    UnknownKb(String),

    #[error("duplicate knowledge base id `{0}`")]
    DuplicateKb(String),

    #[error("knowledge base `{0}` is not a control-level knowledge base")]
    NotControlLevel(String),

    #[error("unknown context property `{property}` in knowledge base `{kb}`")]
    UnknownProperty { kb: String, property: String },

    #[error("unknown pattern `{0}`")]
    UnknownPattern(String),

    #[error("value `{value}` is not in the domain of `{property}` ({})", domain.join(", "))]
    ValueOutOfDomain {
        property: String,
        value: String,
        domain: Vec<String>,
    },

    #[error("context violates contextual constraints: {}", .0.join(", "))]
    ContextViolation(Vec<String>),

    #[error("context is incomplete; unanswered: {}", .0.join(", "))]
    IncompleteContext(Vec<String>),

    #[error("weight rule `{0}` cannot be decided under the current context")]
    UndecidedWeightGuard(String),

    #[error("all criterion weights are zero after applying weight rules")]
    DegenerateWeights,

    #[error("no pattern is feasible under the current context")]
    EmptyFeasibleSet,

    #[error("pattern `{0}` is not feasible under the current context")]
    PatternInfeasible(String),

    #[error("conflict diagnosis requires an empty feasible set ({0} patterns are feasible)")]
    NotConflicted(usize),

    #[error("operation requires state {expected}, session is {actual:?}")]
    WrongState {
        expected: &'static str,
        actual: SessionState,
    },

    #[error("`{0}` is already answered; retract it first")]
    AlreadyAnswered(String),

    #[error("`{0}` has not been answered")]
    NotAnswered(String),

    #[error("pattern `{0}` was not recommended")]
    NotRecommended(String),

    #[error("invalid assistant configuration: {0}")]
    InvalidConfig(String),
}

fn summarize(report: &ValidationReport) -> String {
    report
        .violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
