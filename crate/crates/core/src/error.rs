use thiserror::Error;

use crate::instance::Violation;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures surfaced by the library. Invariant violations found by
/// [`crate::Instance::validate`] are data, not errors; they only become an
/// [`Error::Invalid`] when a caller asks for a validated instance.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed path: {0}")]
    PathShape(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("token {token} out of range for vocabulary of size {vocab_size}")]
    Vocab { token: usize, vocab_size: usize },

    #[error("position {position} out of range 1..={length}")]
    Position { position: usize, length: usize },

    #[error("length {length} is infeasible: {reason}")]
    InfeasibleLength { length: usize, reason: String },

    #[error("no feasible length reaches the terminal position")]
    UnreachableTerminal,

    #[error("dead end at position {0}: no finite outgoing transition")]
    DeadEnd(usize),

    #[error("lattice length {length} exceeds the enumeration cap of {cap}")]
    CapExceeded { length: usize, cap: usize },

    #[error("instance failed validation with {} violation(s): {}", .0.len(), join_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid generator config: {0}")]
    Config(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("{0}")]
    Io(String),
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Precondition(_) => 1,
            Error::InfeasibleLength { .. } | Error::UnreachableTerminal | Error::DeadEnd(_) => 3,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
