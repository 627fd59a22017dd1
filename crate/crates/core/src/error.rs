use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what} document: {source}")]
    Malformed {
        what: &'static str,
        #[source]
        source: serde_json::Error,
    },

    #[error("unsupported schema `{found}` (expected `{expected}`)")]
    Schema { expected: &'static str, found: String },

    #[error("dangling reference to id {id} at {field}")]
    DanglingReference { id: u32, field: String },

    #[error("duplicate id {id} at {field}")]
    DuplicateId { id: u32, field: String },

    #[error("invalid value at {field}: {detail}")]
    InvalidField { field: String, detail: String },

    #[error("duplicate skill name `{0}`")]
    DuplicateSkill(String),

    #[error("skill `{skill}` references undeclared slot `{slot}`")]
    UndeclaredSlot { skill: String, slot: String },

    #[error("unknown skill `{0}`")]
    UnknownSkill(String),

    #[error("label `{label}` does not match any object point (scene labels: {available})")]
    UnresolvedLabel { label: String, available: String },

    #[error("unsatisfiable continuity: `{0}` is required in hand but never grasped earlier")]
    UnsatisfiableContinuity(String),

    #[error("no feasible skill for `{abstract_skill}` at object point {object_point}: {rejected}")]
    Refinement {
        object_point: u32,
        abstract_skill: String,
        rejected: String,
    },

    #[error("tuple generation failed for `{skill}`: {detail}")]
    Generation { skill: String, detail: String },

    #[error("unreachable stance for object point {0}")]
    UnreachableStance(u32),

    #[error("no path from cell {start:?} to cell {goal:?}")]
    NoPath { start: (usize, usize), goal: (usize, usize) },

    #[error("cell {0:?} is blocked or out of bounds")]
    BadCell((usize, usize)),

    #[error("goal evaluation: {0}")]
    GoalReference(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Errors caused by bad input files rather than by planning.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Malformed { .. }
                | Error::Schema { .. }
                | Error::DanglingReference { .. }
                | Error::DuplicateId { .. }
                | Error::InvalidField { .. }
                | Error::DuplicateSkill(_)
                | Error::UndeclaredSlot { .. }
                | Error::UnresolvedLabel { .. }
                | Error::GoalReference(_)
        )
    }
}
