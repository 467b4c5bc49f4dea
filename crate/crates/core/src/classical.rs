//! Classical shifted power iteration on (ηI - U).
//!
//! Serves as the reference the simulated quantum iteration is checked
//! against, and provides the eigengap-based iteration estimate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::Operator;
use crate::state::StateVector;

/// Norms below this are treated as an annihilated iterate.
pub const DEGENERATE_NORM: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalOptions {
    /// Real shift η ≥ 0; the iteration applies (ηI - U).
    pub eta: f64,
    /// Stop once |α_k - α_{k-1}| < tol for `window` consecutive iterations.
    pub tol: f64,
    pub window: usize,
    pub max_iterate: usize,
}

impl Default for ClassicalOptions {
    fn default() -> Self {
        Self {
            eta: 1.0,
            tol: 1e-10,
            window: 3,
            max_iterate: 1000,
        }
    }
}

/// Outcome of a power-iteration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalResult {
    pub v_final: StateVector,
    /// Norm of the last unnormalized iterate.
    pub alpha_final: f64,
    pub alpha_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn check_eta(eta: f64) -> Result<()> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::Domain(format!(
            "shift must be a finite real >= 0, got {eta}"
        )));
    }
    Ok(())
}

/// (ηI - U)v without normalization.
pub fn shifted_apply<O: Operator + ?Sized>(
    u: &O,
    v: &StateVector,
    eta: f64,
) -> Result<StateVector> {
    let uv = u.apply(v)?;
    let amps = v
        .amplitudes()
        .iter()
        .zip(uv.amplitudes())
        .map(|(a, b)| a * eta - b)
        .collect();
    StateVector::from_amplitudes(amps)
}

/// One step: returns ((ηI - U)v / α, α) with α = ‖(ηI - U)v‖.
pub fn shifted_step<O: Operator + ?Sized>(
    u: &O,
    v: &StateVector,
    eta: f64,
) -> Result<(StateVector, f64)> {
    check_eta(eta)?;
    let mut w = shifted_apply(u, v, eta)?;
    let alpha = w.norm();
    if alpha < DEGENERATE_NORM {
        return Err(Error::DegenerateIterate { norm: alpha });
    }
    w.normalize()?;
    Ok((w, alpha))
}

/// Iterate [`shifted_step`] until α settles or `max_iterate` is reached.
pub fn run<O: Operator + ?Sized>(
    u: &O,
    v0: &StateVector,
    opts: &ClassicalOptions,
) -> Result<ClassicalResult> {
    if opts.max_iterate == 0 || opts.window == 0 || !(opts.tol > 0.0) {
        return Err(Error::Domain(
            "max_iterate and window must be >= 1 and tol > 0".into(),
        ));
    }
    let mut v = v0.clone();
    let mut history = Vec::new();
    let mut streak = 0;
    let mut converged = false;
    for _ in 0..opts.max_iterate {
        let (next, alpha) = shifted_step(u, &v, opts.eta)?;
        if let Some(&prev) = history.last() {
            let prev: f64 = prev;
            if (alpha - prev).abs() < opts.tol {
                streak += 1;
            } else {
                streak = 0;
            }
        }
        history.push(alpha);
        v = next;
        if streak >= opts.window {
            converged = true;
            break;
        }
    }
    Ok(ClassicalResult {
        v_final: v,
        alpha_final: *history.last().expect("max_iterate >= 1"),
        iterations: history.len(),
        alpha_history: history,
        converged,
    })
}

/// |η - e^{iφ}|.
pub fn shifted_modulus(phi: f64, eta: f64) -> f64 {
    (Complex64::new(eta, 0.0) - Complex64::from_polar(1.0, phi)).norm()
}

/// Order-of-magnitude iteration count n / ln(|η - e^{iφ1}| / |η - e^{iφ2}|).
pub fn estimate_iterations(phi1: f64, phi2: f64, n: usize, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let (r1, r2) = if eta == 1.0 {
        // same ratio, without cancellation for small phases
        ((phi1 / 2.0).sin().abs(), (phi2 / 2.0).sin().abs())
    } else {
        (shifted_modulus(phi1, eta), shifted_modulus(phi2, eta))
    };
    if !(r2 > 0.0) {
        return Err(Error::Domain(
            "second eigenvalue has |η - λ2| = 0; the estimate is undefined".into(),
        ));
    }
    let ratio = r1 / r2;
    if !(ratio > 1.0) {
        return Err(Error::Domain(format!(
            "no unique dominant eigenvalue: |η-λ1|/|η-λ2| = {ratio}"
        )));
    }
    Ok(n as f64 / ratio.ln())
}

/// Default iteration budget: 10·⌈estimate⌉.
pub fn default_max_iterate(phi1: f64, phi2: f64, n: usize, eta: f64) -> Result<usize> {
    Ok(10 * estimate_iterations(phi1, phi2, n, eta)?.ceil().max(1.0) as usize)
}
