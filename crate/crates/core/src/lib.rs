//! Shifted power iteration on simulated quantum registers.
//!
//! The crate simulates a measurement-driven power method for unitary
//! operators: each step is a controlled-U Hadamard test whose ancilla outcome
//! collapses the register onto (ηI - U)v or (ηI + U)v. Repeatedly keeping
//! the first outcome drives the register to the eigenvector whose eigenvalue
//! is farthest from η, and the branch statistics reveal its eigenphase.
//!
//! Discrete optimization problems (QUBO, Ising couplings, quadratic
//! assignment) are compiled into diagonal phase circuits whose dominant
//! eigenvector is the optimal assignment.

// `!(x > 0.0)` style guards also reject NaN, which is the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod error;
pub mod experiments;
pub mod limits;
pub mod operator;
pub mod qap;
pub mod quantum;
pub mod qubo;
pub mod seed;
pub mod state;

pub use error::{Error, Result};
pub use limits::Limits;
pub use operator::{
    circuit_to_diagonal, random_unitary, AnyOperator, DenseOperator, DiagonalOperator, Gate,
    Operator, PhaseCircuit,
};
pub use quantum::{CollapseMode, EngineConfig, PowerTrace};
pub use state::{equal_superposition, success_probability, StateVector};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
