use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what}: {n} qubits exceeds the configured cap of {cap}")]
    Capacity {
        what: &'static str,
        n: usize,
        cap: usize,
    },

    #[error("qubit count must be at least 1")]
    ZeroQubits,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not unitary (max |U†U - I| = {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("degenerate iterate: shifted operator annihilates the state (norm {norm:.3e})")]
    DegenerateIterate { norm: f64 },

    #[error("dead branch: measurement outcome {branch} has zero probability")]
    DeadBranch { branch: u8 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("objective is constant (lower bound = upper bound = {0})")]
    ConstantObjective(f64),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("penalty {given} is too small; it must exceed {required}")]
    PenaltyTooSmall { given: f64, required: f64 },

    #[error("infeasible assignment: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
