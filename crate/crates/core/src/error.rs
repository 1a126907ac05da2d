use thiserror::Error;

use crate::acref::AcState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("bus {bus}: unknown bus type code {code}")]
    UnknownBusType { bus: u32, code: i64 },

    #[error("duplicate bus id {0}")]
    DuplicateBus(u32),

    #[error("{what} references unknown bus {bus}")]
    UnknownBus { what: String, bus: u32 },

    #[error("invalid case data: {0}")]
    InvalidCase(String),

    #[error("expected exactly one slack bus, found {0}")]
    SlackCount(usize),

    #[error("bus index {index} has no {what} state coordinate")]
    NoStateCoordinate { index: usize, what: &'static str },

    #[error("grid is islanded: {} bus(es) disconnected from the slack", .0.len())]
    Islanded(Vec<u32>),

    #[error("AC load flow did not converge after {iterations} iterations (max mismatch {max_mismatch:.3e} pu)")]
    NotConverged {
        iterations: usize,
        max_mismatch: f64,
        last: Box<AcState>,
    },

    #[error("reference state requires a converged AC solution")]
    NotConvergedReference,

    #[error("singular matrix ({0})")]
    Singular(String),

    #[error("numerically degenerate topology update without graph islanding ({0})")]
    Degenerate(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid topology action: {0}")]
    InvalidTopology(String),

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("no finite matrix is known for this inverse handle; cannot refactor")]
    NotCompactable,
}
