//! Desk-scale size guards.

use crate::error::{Error, Result};

/// Qubit caps for the different dense representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// State vectors and diagonal operators.
    pub state_qubits: usize,
    /// Dense 2^n x 2^n matrices.
    pub dense_qubits: usize,
    /// Exhaustive enumeration (circuit expansion, brute-force oracles).
    pub brute_force_qubits: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            state_qubits: 26,
            dense_qubits: 10,
            brute_force_qubits: 20,
        }
    }
}

impl Limits {
    pub fn check_state(&self, n: usize) -> Result<()> {
        check(n, self.state_qubits, "state vector")
    }

    pub fn check_dense(&self, n: usize) -> Result<()> {
        check(n, self.dense_qubits, "dense operator")
    }

    pub fn check_brute_force(&self, n: usize) -> Result<()> {
        check(n, self.brute_force_qubits, "exhaustive enumeration")
    }
}

fn check(n: usize, cap: usize, what: &'static str) -> Result<()> {
    if n == 0 {
        return Err(Error::ZeroQubits);
    }
    if n > cap {
        return Err(Error::Capacity { what, n, cap });
    }
    Ok(())
}
