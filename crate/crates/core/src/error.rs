//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("instance is empty")]
    EmptyInstance,

    #[error("instance must be square: {agents} agents vs {objects} objects")]
    NotSquare { agents: usize, objects: usize },

    #[error("{what} for {who}: shares sum to {sum}, expected {expected}")]
    BadSum {
        what: String,
        who: String,
        sum: String,
        expected: String,
    },

    #[error("negative share for {who}: {value}")]
    NegativeShare { who: String, value: String },

    #[error("matrix is not bistochastic: {detail}")]
    NotBistochastic { detail: String },

    #[error("matching is not same-sided for this profile: {detail}")]
    NotSameSided { detail: String },

    #[error("supply must be positive, got {supply}")]
    NonPositiveSupply { supply: String },

    #[error("sequence is not a permutation of 0..{n}: {detail}")]
    BadSequence { n: usize, detail: String },

    #[error("partial fill is infeasible: {detail}")]
    SlackImbalance { detail: String },

    #[error("unsupported instance: {detail}")]
    UnsupportedInstance { detail: String },

    #[error("search budget exceeded: {detail}")]
    BudgetExceeded { detail: String },

    #[error("parse error at {at}: {detail}")]
    Parse { at: String, detail: String },

    #[error("unknown fixture id {0:?}")]
    UnknownFixture(String),

    #[error("unknown mechanism id {0:?}")]
    UnknownMechanism(String),

    #[error("unknown property id {0:?}")]
    UnknownProperty(String),
}

pub type Result<T> = std::result::Result<T, Error>;
