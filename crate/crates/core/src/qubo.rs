//! QUBO and Ising instances compiled into diagonal phase circuits.
//!
//! An objective H(x) is mapped onto a diagonal unitary whose eigenphase at
//! basis state |x⟩ is an affine, order-preserving image of H(x) inside
//! [0, π/2]. On that window |1 - e^{iφ}| = 2 sin(φ/2) is increasing, so the
//! shifted power iteration converges to the basis state with the largest
//! phase: the maximizer, or the minimizer when the objective is negated.

use std::collections::HashSet;
use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::operator::{circuit_to_diagonal, AnyOperator, Gate, PhaseCircuit};
use crate::quantum::{iterate, EngineConfig, PowerTrace};
use crate::state::equal_superposition;

/// Largest instance [`brute_force_optimum`] will enumerate.
pub const BRUTE_FORCE_MAX_VARS: usize = 24;

/// Relative probability window used to group tied readout states.
pub const READOUT_TIE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "max")]
    Maximize,
    #[serde(rename = "min")]
    Minimize,
}

/// Values the variables range over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VariableDomain {
    /// x_j ∈ {0, 1}.
    #[default]
    Binary,
    /// s_j = (-1)^{x_j} ∈ {+1, -1}.
    Spin,
}

/// Gate parameterization (α, β) of the single-qubit phase gate
/// diag(e^{i·c·α}, e^{i·c·β}) and its controlled counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateConvention {
    /// (α, β) = (0, 1)
    Binary01,
    /// (α, β) = (1, -1)
    IsingPM,
}

impl GateConvention {
    pub fn alpha(self) -> f64 {
        match self {
            GateConvention::Binary01 => 0.0,
            GateConvention::IsingPM => 1.0,
        }
    }

    pub fn beta(self) -> f64 {
        match self {
            GateConvention::Binary01 => 1.0,
            GateConvention::IsingPM => -1.0,
        }
    }

    /// The convention whose gates read the instance's variables natively.
    pub fn native(domain: VariableDomain) -> Self {
        match domain {
            VariableDomain::Binary => GateConvention::Binary01,
            VariableDomain::Spin => GateConvention::IsingPM,
        }
    }
}

/// H(x) = Σ c_j v_j + Σ_{j<k} q_jk v_j v_k with v = x (binary) or v = s (spin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboInstance {
    n: usize,
    linear: Vec<f64>,
    quadratic: Vec<(usize, usize, f64)>,
    sense: Sense,
    domain: VariableDomain,
}

impl QuboInstance {
    pub fn new(
        n: usize,
        linear: Vec<f64>,
        quadratic: Vec<(usize, usize, f64)>,
        sense: Sense,
    ) -> Result<Self> {
        Self::with_domain(n, linear, quadratic, sense, VariableDomain::Binary)
    }

    pub fn with_domain(
        n: usize,
        linear: Vec<f64>,
        quadratic: Vec<(usize, usize, f64)>,
        sense: Sense,
        domain: VariableDomain,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInstance("instance has no variables".into()));
        }
        if linear.len() != n {
            return Err(Error::InvalidInstance(format!(
                "expected {n} linear coefficients, got {}",
                linear.len()
            )));
        }
        let mut seen = HashSet::new();
        for &(j, k, q) in &quadratic {
            if !(j < k && k < n) {
                return Err(Error::InvalidInstance(format!(
                    "quadratic term ({j}, {k}) needs j < k < {n}"
                )));
            }
            if !seen.insert((j, k)) {
                return Err(Error::InvalidInstance(format!(
                    "duplicate quadratic term ({j}, {k})"
                )));
            }
            if !q.is_finite() {
                return Err(Error::InvalidInstance(format!(
                    "coefficient q_{j}{k} is {q}"
                )));
            }
        }
        if let Some(c) = linear.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidInstance(format!("linear coefficient {c}")));
        }
        Ok(Self {
            n,
            linear,
            quadratic,
            sense,
            domain,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn quadratic(&self) -> &[(usize, usize, f64)] {
        &self.quadratic
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn domain(&self) -> VariableDomain {
        self.domain
    }

    pub fn with_sense(mut self, sense: Sense) -> Self {
        self.sense = sense;
        self
    }

    /// Same instance with every coefficient negated.
    pub fn negated(&self) -> Self {
        Self {
            linear: self.linear.iter().map(|c| -c).collect(),
            quadratic: self.quadratic.iter().map(|&(j, k, q)| (j, k, -q)).collect(),
            ..self.clone()
        }
    }

    /// Objective at an assignment given as per-variable bits.
    pub fn evaluate(&self, x: &[u8]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        Ok(self.eval_with(|j| x[j] != 0))
    }

    /// Objective at basis index `x` (bit j of `x` is variable j).
    pub fn evaluate_index(&self, x: usize) -> f64 {
        self.eval_with(|j| x >> j & 1 == 1)
    }

    fn eval_with(&self, bit: impl Fn(usize) -> bool) -> f64 {
        let val = |j: usize| -> f64 {
            match (self.domain, bit(j)) {
                (VariableDomain::Binary, b) => f64::from(u8::from(b)),
                (VariableDomain::Spin, false) => 1.0,
                (VariableDomain::Spin, true) => -1.0,
            }
        };
        let lin: f64 = self
            .linear
            .iter()
            .enumerate()
            .map(|(j, c)| c * val(j))
            .sum();
        let quad: f64 = self
            .quadratic
            .iter()
            .map(|&(j, k, q)| q * val(j) * val(k))
            .sum();
        lin + quad
    }

    /// Coefficient-sign bounds (lower, upper) on the objective.
    pub fn bounds(&self) -> (f64, f64) {
        let coeffs = self
            .linear
            .iter()
            .copied()
            .chain(self.quadratic.iter().map(|t| t.2));
        match self.domain {
            VariableDomain::Binary => {
                coeffs.fold((0.0, 0.0), |(lo, hi), c| (lo + c.min(0.0), hi + c.max(0.0)))
            }
            VariableDomain::Spin => {
                let spread: f64 = coeffs.map(f64::abs).sum();
                (-spread, spread)
            }
        }
    }

    /// The same objective rewritten over the other variable domain. Returns
    /// the instance and the additive constant dropped by the rewrite, so that
    /// H_self(x) = H_other(x) + constant for every basis state x.
    pub fn reformulated(&self) -> (QuboInstance, f64) {
        let (linear, quadratic, constant) = match self.domain {
            VariableDomain::Binary => binary_to_spin(&self.linear, &self.quadratic),
            VariableDomain::Spin => spin_to_binary(&self.linear, &self.quadratic),
        };
        let domain = match self.domain {
            VariableDomain::Binary => VariableDomain::Spin,
            VariableDomain::Spin => VariableDomain::Binary,
        };
        (
            QuboInstance {
                n: self.n,
                linear,
                quadratic,
                sense: self.sense,
                domain,
            },
            constant,
        )
    }
}

type Coeffs = (Vec<f64>, Vec<(usize, usize, f64)>, f64);

/// x = (1 - s)/2 substituted into Σ a x + Σ b x x.
fn binary_to_spin(a: &[f64], b: &[(usize, usize, f64)]) -> Coeffs {
    let mut lin: Vec<f64> = a.iter().map(|c| -c / 2.0).collect();
    let mut constant: f64 = a.iter().sum::<f64>() / 2.0;
    let mut quad = Vec::with_capacity(b.len());
    for &(j, k, q) in b {
        // q x_j x_k = q/4 (1 - s_j - s_k + s_j s_k)
        constant += q / 4.0;
        lin[j] -= q / 4.0;
        lin[k] -= q / 4.0;
        quad.push((j, k, q / 4.0));
    }
    (lin, quad, constant)
}

/// s = 1 - 2x substituted into Σ c s + Σ q s s.
fn spin_to_binary(c: &[f64], q: &[(usize, usize, f64)]) -> Coeffs {
    let mut lin: Vec<f64> = c.iter().map(|c| -2.0 * c).collect();
    let mut constant: f64 = c.iter().sum();
    let mut quad = Vec::with_capacity(q.len());
    for &(j, k, w) in q {
        constant += w;
        lin[j] -= 2.0 * w;
        lin[k] -= 2.0 * w;
        quad.push((j, k, 4.0 * w));
    }
    (lin, quad, constant)
}

/// Spin-glass couplings H = Σ J_ij s_i s_j as a spin-domain instance.
pub fn ising_from_couplings(
    n: usize,
    couplings: &[(usize, usize, f64)],
    sense: Sense,
) -> Result<(QuboInstance, GateConvention)> {
    let inst = QuboInstance::with_domain(
        n,
        vec![0.0; n],
        couplings.to_vec(),
        sense,
        VariableDomain::Spin,
    )?;
    Ok((inst, GateConvention::IsingPM))
}

/// Affine map from objective values to eigenphases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPlan {
    /// Radians per objective unit.
    pub s: f64,
    /// Uniform phase added to every diagonal entry.
    pub offset: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub sense: Sense,
}

impl ScalingPlan {
    /// Eigenphase assigned to objective value `h`.
    pub fn phase_of(&self, h: f64) -> f64 {
        match self.sense {
            Sense::Maximize => self.s * (h - self.lower_bound),
            Sense::Minimize => self.s * (self.upper_bound - h),
        }
    }

    /// Inverse of [`ScalingPlan::phase_of`].
    pub fn objective_of(&self, phi: f64) -> f64 {
        match self.sense {
            Sense::Maximize => self.lower_bound + phi / self.s,
            Sense::Minimize => self.upper_bound - phi / self.s,
        }
    }

    fn signed_scale(&self) -> f64 {
        match self.sense {
            Sense::Maximize => self.s,
            Sense::Minimize => -self.s,
        }
    }
}

/// Fit the objective range into [0, π/2] with the optimum at the top.
pub fn make_scaling(q: &QuboInstance, sense: Sense) -> Result<ScalingPlan> {
    let (lower_bound, upper_bound) = q.bounds();
    if !(upper_bound > lower_bound) {
        return Err(Error::ConstantObjective(lower_bound));
    }
    let s = FRAC_PI_2 / (upper_bound - lower_bound);
    let offset = match sense {
        Sense::Maximize => -s * lower_bound,
        Sense::Minimize => s * upper_bound,
    };
    Ok(ScalingPlan {
        s,
        offset,
        lower_bound,
        upper_bound,
        sense,
    })
}

/// Objective gates for n variables and m quadratic terms.
pub fn gate_count(n: usize, m: usize) -> usize {
    debug_assert!(m <= n * n.saturating_sub(1) / 2);
    n + m
}

/// Compile into one phase gate per variable, one controlled phase gate per
/// quadratic term (in input order) and a trailing uniform offset gate.
///
/// Every gate has the (α, β) form of `conv`. When the instance's domain
/// differs from the convention's, or for spin couplings under IsingPM, the
/// coefficients are rewritten so the diagonal still equals
/// `plan.phase_of(H(x))` at every x.
pub fn compile(q: &QuboInstance, conv: GateConvention, plan: &ScalingPlan) -> Result<PhaseCircuit> {
    let sigma = plan.signed_scale();
    let (single, pair, constant) = gate_coefficients(q, conv);
    let (a, b) = (conv.alpha(), conv.beta());
    let mut gates = Vec::with_capacity(q.n + pair.len() + 1);
    for (j, c) in single.iter().enumerate() {
        let c = sigma * c;
        gates.push(Gate::SinglePhase {
            qubit: j,
            phase0: c * a,
            phase1: c * b,
        });
    }
    for &(j, k, w) in &pair {
        let w = sigma * w;
        gates.push(Gate::ControlledPhase {
            control: j,
            target: k,
            phase10: w * a,
            phase11: w * b,
        });
    }
    let off = sigma * constant + plan.offset;
    gates.push(Gate::SinglePhase {
        qubit: 0,
        phase0: off,
        phase1: off,
    });
    PhaseCircuit::new(q.n, gates)
}

/// Coefficients realized by the gates of `conv`:
/// Binary01 gates contribute a_j x_j and b_jk x_j x_k,
/// IsingPM gates contribute A_j s_j and B_jk x_j s_k.
fn gate_coefficients(q: &QuboInstance, conv: GateConvention) -> Coeffs {
    match (q.domain, conv) {
        (VariableDomain::Binary, GateConvention::Binary01) => {
            (q.linear.clone(), q.quadratic.clone(), 0.0)
        }
        (VariableDomain::Spin, GateConvention::Binary01) => spin_to_binary(&q.linear, &q.quadratic),
        (VariableDomain::Spin, GateConvention::IsingPM) => {
            // w s_j s_k = w s_k - 2w x_j s_k
            let mut lin = q.linear.clone();
            let mut pair = Vec::with_capacity(q.quadratic.len());
            for &(j, k, w) in &q.quadratic {
                lin[k] += w;
                pair.push((j, k, -2.0 * w));
            }
            (lin, pair, 0.0)
        }
        (VariableDomain::Binary, GateConvention::IsingPM) => {
            // a x_j = a/2 - (a/2) s_j ; b x_j x_k = b/4 - (b/4) s_j - (b/2) x_j s_k
            let mut lin: Vec<f64> = q.linear.iter().map(|a| -a / 2.0).collect();
            let mut constant: f64 = q.linear.iter().sum::<f64>() / 2.0;
            let mut pair = Vec::with_capacity(q.quadratic.len());
            for &(j, k, b) in &q.quadratic {
                constant += b / 4.0;
                lin[j] -= b / 4.0;
                pair.push((j, k, -b / 2.0));
            }
            (lin, pair, constant)
        }
    }
}

pub fn index_to_bits(x: usize, n: usize) -> Vec<u8> {
    (0..n).map(|j| (x >> j & 1) as u8).collect()
}

pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (j, &b)| acc | (usize::from(b != 0) << j))
}

/// Render with x_0 first, e.g. "011".
pub fn bits_to_string(bits: &[u8]) -> String {
    bits.iter()
        .map(|&b| if b != 0 { '1' } else { '0' })
        .collect()
}

fn better(sense: Sense, a: (usize, f64), b: (usize, f64)) -> (usize, f64) {
    let a_wins = match sense {
        Sense::Maximize => a.1 > b.1,
        Sense::Minimize => a.1 < b.1,
    };
    if a_wins || (a.1 == b.1 && a.0 < b.0) {
        a
    } else {
        b
    }
}

/// Exact optimum by enumeration; ties go to the smallest basis index.
pub fn brute_force_optimum(q: &QuboInstance) -> Result<(Vec<u8>, f64)> {
    if q.n > BRUTE_FORCE_MAX_VARS {
        return Err(Error::Capacity {
            what: "brute-force QUBO",
            n: q.n,
            cap: BRUTE_FORCE_MAX_VARS,
        });
    }
    let sense = q.sense;
    let (x, v) = (0..1usize << q.n)
        .into_par_iter()
        .map(|x| (x, q.evaluate_index(x)))
        .reduce_with(|a, b| better(sense, a, b))
        .expect("at least one assignment");
    Ok((index_to_bits(x, q.n), v))
}

/// All basis indices attaining the optimum within `tol`.
pub fn brute_force_optimal_set(q: &QuboInstance, tol: f64) -> Result<Vec<usize>> {
    let (_, best) = brute_force_optimum(q)?;
    Ok((0..1usize << q.n)
        .filter(|&x| (q.evaluate_index(x) - best).abs() <= tol)
        .collect())
}

/// Result of [`solve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Lowest-index state of the readout set.
    pub bitstring: Vec<u8>,
    pub value: f64,
    pub iterations: usize,
    /// Eigenphase read from the final branch statistic.
    pub phi_recovered: Option<f64>,
    /// Objective value implied by `phi_recovered`.
    pub value_from_phase: Option<f64>,
    /// Probability mass of the readout set at termination.
    pub success_prob: f64,
    pub converged: bool,
    /// Basis states tied for the highest probability at termination.
    pub readout_set: Vec<usize>,
    pub plan: ScalingPlan,
    #[serde(skip)]
    pub trace: Option<PowerTrace>,
}

impl Solution {
    /// Whether the readout set holds at least half the probability.
    pub fn is_confident(&self) -> bool {
        self.success_prob >= 0.5
    }
}

/// Compile `q`, run the power iteration from the uniform superposition and
/// read out the most probable basis state.
pub fn solve(q: &QuboInstance, cfg: &EngineConfig) -> Result<Solution> {
    let limits = Limits::default();
    limits.check_state(q.n)?;
    let plan = make_scaling(q, q.sense)?;
    let circuit = compile(q, GateConvention::native(q.domain), &plan)?;
    // the expanded diagonal acts identically and costs one pass per apply
    let op = if q.n <= limits.brute_force_qubits {
        AnyOperator::Diagonal(circuit_to_diagonal(&circuit)?)
    } else {
        AnyOperator::Circuit(circuit)
    };
    let v0 = equal_superposition(q.n)?;
    let (summary, trace) = iterate(&op, &v0, cfg, None)?;
    let probs = summary.v_final.probabilities();
    let p_max = probs.iter().cloned().fold(0.0, f64::max);
    let readout_set: Vec<usize> = probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= p_max * (1.0 - READOUT_TIE_TOL))
        .map(|(x, _)| x)
        .collect();
    let best = readout_set[0];
    let bitstring = index_to_bits(best, q.n);
    let phi_recovered = trace.final_phase();
    Ok(Solution {
        value: q.evaluate_index(best),
        bitstring,
        iterations: summary.iterations,
        phi_recovered,
        value_from_phase: phi_recovered.map(|phi| plan.objective_of(phi)),
        success_prob: readout_set.iter().map(|&x| probs[x]).sum(),
        converged: summary.converged,
        readout_set,
        plan,
        trace: Some(trace),
    })
}
