//! Simulated quantum shifted power iteration.
//!
//! One iteration is a Hadamard test: an ancilla is prepared in
//! cos θ|0⟩ + sin θ|1⟩ with cot θ = η, controls U on the register, passes
//! through a Hadamard and is measured. The register amplitudes on the two
//! outcomes are
//!
//! ```text
//! |0⟩: (cos θ·v + sin θ·Uv)/√2
//! |1⟩: (cos θ·v - sin θ·Uv)/√2  ∝ (ηI - U)v
//! ```
//!
//! so collapsing onto outcome 1 every time reproduces the classical shifted
//! power iteration. For η = 1 this is the plain Hadamard test and
//! p1 = ‖(I - U)v‖²/4.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classical::{check_eta, ClassicalResult, DEGENERATE_NORM};
use crate::error::{Error, Result};
use crate::operator::{DiagonalOperator, Operator};
use crate::state::{success_probability, StateVector};

/// How the ancilla measurement is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CollapseMode {
    /// Always keep outcome 1.
    #[default]
    PostSelect,
    /// Draw the outcome with probability p1 from a seeded generator.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub eta: f64,
    pub mode: CollapseMode,
    /// Tomography tolerance on p1.
    pub tol: f64,
    /// Number of tomography snapshots that must agree.
    pub window: usize,
    pub max_iterate: usize,
    pub seed: u64,
    /// Iterations between tomography snapshots.
    pub tomography_stride: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            eta: 1.0,
            mode: CollapseMode::PostSelect,
            tol: 1e-6,
            window: 3,
            max_iterate: 10_000,
            seed: 0,
            tomography_stride: 5,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        check_eta(self.eta)?;
        if self.max_iterate == 0 || self.window == 0 || self.tomography_stride == 0 {
            return Err(Error::Domain(
                "max_iterate, window and tomography_stride must be >= 1".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Domain(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Both measurement outcomes of one Hadamard-test step.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchOutcome {
    pub p0: f64,
    pub p1: f64,
    /// Normalized register state after outcome 0; `None` when p0 vanishes.
    pub state0: Option<StateVector>,
    pub state1: Option<StateVector>,
    /// ‖(ηI - U)v‖.
    pub alpha: f64,
}

impl BranchOutcome {
    pub fn state(&self, branch: u8) -> Option<&StateVector> {
        if branch == 0 {
            self.state0.as_ref()
        } else {
            self.state1.as_ref()
        }
    }
}

/// Ancilla preparation angle θ with cot θ = η (θ = π/4 for η = 1).
pub fn ancilla_angle(eta: f64) -> f64 {
    (1.0 / eta).atan()
}

/// Simulate the controlled-U Hadamard test on `v` and return both branches.
pub fn hadamard_test_step<O: Operator + ?Sized>(
    u: &O,
    v: &StateVector,
    eta: f64,
) -> Result<BranchOutcome> {
    check_eta(eta)?;
    let theta = ancilla_angle(eta);
    let (sin, cos) = theta.sin_cos();
    let uv = u.apply(v)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut b0 = Vec::with_capacity(v.dim());
    let mut b1 = Vec::with_capacity(v.dim());
    for (a, b) in v.amplitudes().iter().zip(uv.amplitudes()) {
        let stay = a * cos;
        let moved = b * sin;
        b0.push((stay + moved) * h);
        b1.push((stay - moved) * h);
    }
    let b0 = StateVector::from_amplitudes(b0)?;
    let b1 = StateVector::from_amplitudes(b1)?;
    let (n0, n1) = (b0.norm(), b1.norm());
    let alpha = n1 * std::f64::consts::SQRT_2 / sin;
    let prob = |norm: f64| {
        if norm < DEGENERATE_NORM {
            0.0
        } else {
            norm * norm
        }
    };
    Ok(BranchOutcome {
        p0: prob(n0),
        p1: prob(n1),
        state0: normalized_branch(b0, n0),
        state1: normalized_branch(b1, n1),
        alpha,
    })
}

fn normalized_branch(mut s: StateVector, norm: f64) -> Option<StateVector> {
    if norm < DEGENERATE_NORM {
        return None;
    }
    let inv = 1.0 / norm;
    for a in s.amplitudes_mut() {
        *a *= inv;
    }
    Some(s)
}

/// Eigenphase from the branch statistic: arccos(1 - α²/2) ∈ [0, π].
pub fn recover_phase(alpha: f64) -> Result<f64> {
    recover_phase_shifted(alpha, 1.0)
}

/// Eigenphase from α = |η - e^{iφ}|, i.e. arccos((1 + η² - α²) / 2η).
/// Reduces to [`recover_phase`] at η = 1.
pub fn recover_phase_shifted(alpha: f64, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("alpha must be >= 0, got {alpha}")));
    }
    if eta == 0.0 {
        return Err(Error::Domain("phase is unobservable with shift 0".into()));
    }
    let hi = 1.0 + eta;
    let lo = (1.0 - eta).abs();
    let slack = 1e-12;
    if alpha > hi + slack || alpha < lo - slack {
        return Err(Error::Domain(format!(
            "alpha {alpha} outside the attainable range [{lo}, {hi}]"
        )));
    }
    let a = alpha.clamp(lo, hi);
    let cos = if eta == 1.0 {
        1.0 - a * a / 2.0
    } else {
        (1.0 + eta * eta - a * a) / (2.0 * eta)
    };
    Ok(cos.clamp(-1.0, 1.0).acos())
}

/// One iteration of the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration number.
    pub k: usize,
    pub branch_taken: u8,
    pub p1: f64,
    pub alpha: f64,
    /// Instantaneous phase reading; meaningful only once α has settled.
    pub phi_estimate: Option<f64>,
    /// Mass on the caller-supplied dominant set after this iteration.
    pub success_prob: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTrace {
    pub mode: CollapseMode,
    pub seed: u64,
    pub eta: f64,
    pub records: Vec<IterationRecord>,
}

impl PowerTrace {
    pub fn new(cfg: &EngineConfig) -> Self {
        Self {
            mode: cfg.mode,
            seed: cfg.seed,
            eta: cfg.eta,
            records: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Phase read from the final α (the converged eigenphase when the run
    /// converged).
    pub fn final_phase(&self) -> Option<f64> {
        self.last().and_then(|r| r.phi_estimate)
    }
}

/// True when the last `window` tomography snapshots of p1, spaced
/// `tomography_stride` iterations apart and ending at the latest record, all
/// lie within `tol` of each other.
pub fn tomography_converged(trace: &PowerTrace, cfg: &EngineConfig) -> bool {
    let recs = &trace.records;
    let stride = cfg.tomography_stride.max(1);
    let window = cfg.window.max(1);
    let needed = (window - 1) * stride + 1;
    if recs.is_empty() || recs.len() < needed {
        return false;
    }
    let last = recs.len() - 1;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..window {
        let p = recs[last - i * stride].p1;
        lo = lo.min(p);
        hi = hi.max(p);
    }
    hi - lo < cfg.tol
}

/// Run the quantum shifted power iteration from `v0`.
///
/// `dominant`, when given, is used only to attach success probabilities to
/// the trace. Exhausting `max_iterate` yields `converged = false`.
pub fn iterate<O: Operator + ?Sized>(
    u: &O,
    v0: &StateVector,
    cfg: &EngineConfig,
    dominant: Option<&[usize]>,
) -> Result<(ClassicalResult, PowerTrace)> {
    cfg.validate()?;
    let mut rng = crate::seed::rng(cfg.seed, crate::seed::BRANCH, 0);
    let mut trace = PowerTrace::new(cfg);
    let mut v = v0.clone();
    let mut converged = false;
    for k in 1..=cfg.max_iterate {
        let out = hadamard_test_step(u, &v, cfg.eta)?;
        let branch = match cfg.mode {
            CollapseMode::PostSelect => {
                if out.state1.is_none() {
                    return Err(Error::DeadBranch { branch: 1 });
                }
                1
            }
            CollapseMode::Sample => {
                let draw: f64 = rng.gen();
                let pick = u8::from(draw < out.p1);
                if out.state(pick).is_some() {
                    pick
                } else {
                    1 - pick
                }
            }
        };
        v = out
            .state(branch)
            .cloned()
            .ok_or(Error::DeadBranch { branch })?;
        trace.records.push(IterationRecord {
            k,
            branch_taken: branch,
            p1: out.p1,
            alpha: out.alpha,
            phi_estimate: recover_phase_shifted(out.alpha, cfg.eta).ok(),
            success_prob: dominant.map(|d| success_probability(&v, d)),
        });
        if k % cfg.tomography_stride == 0 && tomography_converged(&trace, cfg) {
            converged = true;
            break;
        }
    }
    let alpha_history: Vec<f64> = trace.records.iter().map(|r| r.alpha).collect();
    let summary = ClassicalResult {
        v_final: v,
        alpha_final: *alpha_history.last().expect("at least one iteration"),
        iterations: alpha_history.len(),
        alpha_history,
        converged,
    };
    Ok((summary, trace))
}

/// Closed form of k post-selected iterations on a diagonal operator:
/// normalize(w) with w_x = (η - e^{iφ_x})^k · v0_x.
///
/// Magnitudes and angles are accumulated separately in log form and rescaled
/// by the largest log-magnitude before exponentiation, so large k does not
/// underflow.
pub fn analytic_diagonal_iterate(
    u: &DiagonalOperator,
    v0: &StateVector,
    k: usize,
    eta: f64,
) -> Result<StateVector> {
    check_eta(eta)?;
    u.check_dim(v0)?;
    if k == 0 {
        return Ok(v0.clone());
    }
    let kf = k as f64;
    let shift = Complex64::new(eta, 0.0);
    let polar: Vec<Option<(f64, f64)>> = v0
        .amplitudes()
        .iter()
        .zip(u.phases())
        .map(|(a, &phi)| {
            let z = shift - Complex64::from_polar(1.0, phi);
            let (rz, tz) = z.to_polar();
            let (ra, ta) = a.to_polar();
            if rz == 0.0 || ra == 0.0 {
                None
            } else {
                Some((kf * rz.ln() + ra.ln(), kf * tz + ta))
            }
        })
        .collect();
    let top = polar
        .iter()
        .flatten()
        .map(|&(m, _)| m)
        .fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::DegenerateIterate { norm: 0.0 });
    }
    let amps = polar
        .iter()
        .map(|p| match *p {
            Some((m, t)) => Complex64::from_polar((m - top).exp(), t),
            None => Complex64::new(0.0, 0.0),
        })
        .collect();
    let mut w = StateVector::from_amplitudes(amps)?;
    w.normalize()?;
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::shifted_step;
    use crate::operator::random_unitary;
    use crate::state::equal_superposition;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

    #[test]
    fn quarter_turn_eigenvector() {
        let u = DiagonalOperator::new(vec![0.0, FRAC_PI_2]).unwrap();
        let out = hadamard_test_step(&u, &StateVector::basis(1, 1).unwrap(), 1.0).unwrap();
        let oracle = (FRAC_PI_4.sin()).powi(2);
        assert!((out.p1 - oracle).abs() < 1e-15);
        assert!((out.p1 - 0.5).abs() < 1e-15);
        assert!((out.alpha - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn zero_phase_eigenvector_kills_branch_one() {
        let u = DiagonalOperator::new(vec![0.0, FRAC_PI_2]).unwrap();
        let v = StateVector::basis(1, 0).unwrap();
        let out = hadamard_test_step(&u, &v, 1.0).unwrap();
        assert_eq!(out.p1, 0.0);
        assert!(out.state1.is_none());
        let err = iterate(&u, &v, &EngineConfig::default(), None).unwrap_err();
        assert_eq!(err, Error::DeadBranch { branch: 1 });
    }

    #[test]
    fn sign_flip_splits_evenly() {
        let u = DiagonalOperator::new(vec![0.0, PI]).unwrap();
        let out = hadamard_test_step(&u, &equal_superposition(1).unwrap(), 1.0).unwrap();
        assert!((out.p0 - 0.5).abs() < 1e-15 && (out.p1 - 0.5).abs() < 1e-15);
        let s1 = out.state1.unwrap();
        let s0 = out.state0.unwrap();
        assert!((s1.amplitudes()[1] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(s1.amplitudes()[0].norm() < 1e-15);
        assert!((s0.amplitudes()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(s0.amplitudes()[1].norm() < 1e-15);
    }

    #[test]
    fn general_shift_branch_matches_matrix_path() {
        let u = random_unitary(3, 5).unwrap();
        let mut rng = crate::seed::rng(5, crate::seed::INIT, 0);
        let v = StateVector::random(3, &mut rng).unwrap();
        for eta in [0.0, 0.3, 1.0, 2.5] {
            let out = hadamard_test_step(&u, &v, eta).unwrap();
            assert!((out.p0 + out.p1 - 1.0).abs() < 1e-12);
            let (direct, alpha) = shifted_step(&u, &v, eta).unwrap();
            let d = out.state1.unwrap().max_abs_diff(&direct).unwrap();
            assert!(d < 1e-12, "eta {eta}: {d}");
            assert!((out.alpha - alpha).abs() < 1e-12);
        }
    }

    #[test]
    fn post_select_sign_flip() {
        let u = DiagonalOperator::new(vec![0.0, PI]).unwrap();
        let (sum, trace) = iterate(
            &u,
            &equal_superposition(1).unwrap(),
            &EngineConfig::default(),
            Some(&[1]),
        )
        .unwrap();
        assert!(sum.converged);
        assert!(trace.records.iter().all(|r| r.branch_taken == 1));
        assert_eq!(trace.records[0].success_prob, Some(1.0));
        assert!(sum.alpha_history[1..]
            .iter()
            .all(|a| (a - 2.0).abs() < 1e-15));
        assert!((trace.final_phase().unwrap() - PI).abs() < 1e-7);
        // snapshots at k = 5, 10, 15 agree
        assert_eq!(sum.iterations, 15);
    }

    #[test]
    fn post_select_fixed_point() {
        // U = Q diag(λ) Q† with known eigenvectors (columns of Q)
        let q = random_unitary(2, 9).unwrap();
        let phases = [0.4, 1.3, 0.2, 0.9];
        let mut entries = vec![Complex64::new(0.0, 0.0); 16];
        for r in 0..4 {
            for c in 0..4 {
                entries[r * 4 + c] = (0..4)
                    .map(|k| {
                        q.entry(r, k) * Complex64::from_polar(1.0, phases[k]) * q.entry(c, k).conj()
                    })
                    .sum();
            }
        }
        let u = crate::operator::DenseOperator::new(2, entries).unwrap();
        let v_star = StateVector::from_amplitudes((0..4).map(|r| q.entry(r, 1)).collect()).unwrap();
        let (sum, _) = iterate(&u, &v_star, &EngineConfig::default(), None).unwrap();
        assert!(sum.converged);
        assert_eq!(sum.iterations, 5 * 3);
        let d = sum
            .v_final
            .canonicalized()
            .max_abs_diff(&v_star.canonicalized())
            .unwrap();
        assert!(d < 1e-12, "{d}");
        assert!((recover_phase(sum.alpha_final).unwrap() - 1.3).abs() < 1e-12);
    }

    #[test]
    fn sample_mode_is_reproducible() {
        let mut rng = crate::seed::rng(4, crate::seed::INSTANCE, 0);
        let phases = (0..16).map(|_| rng.gen_range(0.0..FRAC_PI_2)).collect();
        let u = DiagonalOperator::new(phases).unwrap();
        let cfg = EngineConfig {
            mode: CollapseMode::Sample,
            seed: 77,
            max_iterate: 200,
            ..Default::default()
        };
        let v0 = equal_superposition(4).unwrap();
        let a = iterate(&u, &v0, &cfg, Some(&[0])).unwrap();
        let b = iterate(&u, &v0, &cfg, Some(&[0])).unwrap();
        assert_eq!(a, b);
        assert!(a.1.records.iter().any(|r| r.branch_taken == 0));
    }

    #[test]
    fn recover_phase_values() {
        assert_eq!(recover_phase(0.0).unwrap(), 0.0);
        assert!((recover_phase(SQRT_2).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((recover_phase(2.0).unwrap() - PI).abs() < 1e-15);
        assert_eq!(recover_phase(2.0 + 5e-13).unwrap(), PI);
        assert!(matches!(recover_phase(2.0 + 1e-9), Err(Error::Domain(_))));
        assert!(recover_phase(-0.1).is_err());
    }

    #[test]
    fn recover_phase_shifted_inverts_modulus() {
        for eta in [0.5, 1.0, 1.7] {
            for phi in [0.1, 0.9, 2.0, 3.0] {
                let alpha = crate::classical::shifted_modulus(phi, eta);
                assert!((recover_phase_shifted(alpha, eta).unwrap() - phi).abs() < 1e-9);
            }
        }
    }

    fn trace_of(p1s: &[f64]) -> PowerTrace {
        PowerTrace {
            mode: CollapseMode::PostSelect,
            seed: 0,
            eta: 1.0,
            records: p1s
                .iter()
                .enumerate()
                .map(|(i, &p1)| IterationRecord {
                    k: i + 1,
                    branch_taken: 1,
                    p1,
                    alpha: 2.0 * p1.sqrt(),
                    phi_estimate: None,
                    success_prob: None,
                })
                .collect(),
        }
    }

    #[test]
    fn tomography_constant_sequence() {
        let cfg = EngineConfig {
            tomography_stride: 1,
            ..Default::default()
        };
        assert!(tomography_converged(&trace_of(&[0.3; 3]), &cfg));
        assert!(!tomography_converged(&trace_of(&[0.3; 2]), &cfg));
        let strided = EngineConfig::default();
        assert!(tomography_converged(&trace_of(&[0.3; 11]), &strided));
        assert!(!tomography_converged(&trace_of(&[0.3; 10]), &strided));
    }

    #[test]
    fn tomography_alternating_sequence() {
        let cfg = EngineConfig {
            tomography_stride: 1,
            ..Default::default()
        };
        let p: Vec<f64> = (0..20)
            .map(|i| 0.4 + if i % 2 == 0 { 10.0 } else { -10.0 } * cfg.tol)
            .collect();
        assert!(!tomography_converged(&trace_of(&p), &cfg));
    }

    #[test]
    fn analytic_zero_and_one_step() {
        let u = DiagonalOperator::new(vec![0.2, 1.1, 0.5, 0.9]).unwrap();
        let v0 = equal_superposition(2).unwrap();
        assert_eq!(analytic_diagonal_iterate(&u, &v0, 0, 1.0).unwrap(), v0);
        let one = analytic_diagonal_iterate(&u, &v0, 1, 1.0).unwrap();
        let step = hadamard_test_step(&u, &v0, 1.0).unwrap().state1.unwrap();
        assert!(one.max_abs_diff(&step).unwrap() < 1e-12);
    }

    #[test]
    fn analytic_survives_large_k() {
        let u = DiagonalOperator::new(vec![0.2, 1.1, 0.5, 1.0999]).unwrap();
        let v0 = equal_superposition(2).unwrap();
        let w = analytic_diagonal_iterate(&u, &v0, 200_000, 1.0).unwrap();
        assert!((w.norm() - 1.0).abs() < 1e-12);
        assert!(w.probability(1) > 0.99);
    }

    #[test]
    fn analytic_all_annihilated() {
        let u = DiagonalOperator::identity(2).unwrap();
        let v0 = equal_superposition(2).unwrap();
        assert!(matches!(
            analytic_diagonal_iterate(&u, &v0, 3, 1.0),
            Err(Error::DegenerateIterate { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let u = DiagonalOperator::new(vec![0.0, 1.0]).unwrap();
        let v = equal_superposition(1).unwrap();
        for cfg in [
            EngineConfig {
                max_iterate: 0,
                ..Default::default()
            },
            EngineConfig {
                window: 0,
                ..Default::default()
            },
            EngineConfig {
                tol: -1.0,
                ..Default::default()
            },
            EngineConfig {
                tomography_stride: 0,
                ..Default::default()
            },
            EngineConfig {
                eta: f64::NAN,
                ..Default::default()
            },
        ] {
            assert!(iterate(&u, &v, &cfg, None).is_err());
        }
    }

    #[test]
    fn exhaustion_is_not_an_error() {
        let u = DiagonalOperator::new(vec![0.3, 0.31, 0.1, 0.2]).unwrap();
        let cfg = EngineConfig {
            max_iterate: 7,
            ..Default::default()
        };
        let (sum, trace) = iterate(&u, &equal_superposition(2).unwrap(), &cfg, None).unwrap();
        assert!(!sum.converged);
        assert_eq!(sum.iterations, 7);
        assert_eq!(trace.records.len(), 7);
    }
}
