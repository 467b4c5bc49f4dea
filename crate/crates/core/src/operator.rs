//! Unitary operators in three interchangeable forms: a diagonal of phases, a
//! dense matrix, and a circuit of diagonal phase gates.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::state::StateVector;

/// Tolerance on |U†U - I| accepted by [`DenseOperator::new`].
pub const UNITARITY_TOL: f64 = 1e-10;

/// Anything that can act on an n-qubit register.
pub trait Operator: Send + Sync {
    fn n(&self) -> usize;

    fn apply(&self, v: &StateVector) -> Result<StateVector>;

    /// Phases of the operator if it is known to be diagonal without expansion.
    fn diagonal_phases(&self) -> Option<&[f64]> {
        None
    }

    fn check_dim(&self, v: &StateVector) -> Result<()> {
        if v.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.n(),
                found: v.dim(),
            });
        }
        Ok(())
    }
}

/// Reduce an angle into (-π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Distance between two angles on the circle.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

/// diag(e^{iφ_0}, …, e^{iφ_{2^n-1}}). Phases are kept as given (unreduced).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalOperator {
    n: usize,
    phases: Vec<f64>,
}

impl DiagonalOperator {
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        let len = phases.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::DimensionMismatch {
                expected: len.next_power_of_two().max(2),
                found: len,
            });
        }
        let n = len.trailing_zeros() as usize;
        Limits::default().check_state(n)?;
        Ok(Self { n, phases })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Limits::default().check_state(n)?;
        Ok(Self {
            n,
            phases: vec![0.0; 1 << n],
        })
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn eigenvalue(&self, x: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.phases[x])
    }

    /// Basis states maximizing |η - e^{iφ_x}|, within a relative tolerance.
    pub fn dominant_set(&self, eta: f64, rel_tol: f64) -> Vec<usize> {
        let mags: Vec<f64> = (0..self.phases.len())
            .map(|x| (Complex64::new(eta, 0.0) - self.eigenvalue(x)).norm())
            .collect();
        let top = mags.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        mags.iter()
            .enumerate()
            .filter(|(_, &m)| top - m <= rel_tol * top.max(f64::MIN_POSITIVE))
            .map(|(x, _)| x)
            .collect()
    }
}

impl Operator for DiagonalOperator {
    fn n(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &StateVector) -> Result<StateVector> {
        self.check_dim(v)?;
        let amps = v
            .amplitudes()
            .iter()
            .zip(&self.phases)
            .map(|(a, &phi)| a * Complex64::from_polar(1.0, phi))
            .collect();
        StateVector::from_amplitudes(amps)
    }

    fn diagonal_phases(&self) -> Option<&[f64]> {
        Some(&self.phases)
    }
}

/// A dense 2^n x 2^n unitary stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseOperator {
    n: usize,
    entries: Vec<Complex64>,
}

impl DenseOperator {
    /// Build from row-major entries, rejecting non-unitary input.
    pub fn new(n: usize, entries: Vec<Complex64>) -> Result<Self> {
        Self::with_limits(n, entries, &Limits::default())
    }

    pub fn with_limits(n: usize, entries: Vec<Complex64>, limits: &Limits) -> Result<Self> {
        limits.check_dense(n)?;
        let dim = 1usize << n;
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        let op = Self { n, entries };
        let deviation = op.unitarity_deviation();
        if !(deviation <= UNITARITY_TOL) {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim() + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// max_{ij} |(U†U - I)_{ij}|.
    pub fn unitarity_deviation(&self) -> f64 {
        let dim = self.dim();
        (0..dim)
            .into_par_iter()
            .map(|i| {
                let mut worst: f64 = 0.0;
                for j in 0..dim {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..dim {
                        acc += self.entries[k * dim + i].conj() * self.entries[k * dim + j];
                    }
                    if i == j {
                        acc -= 1.0;
                    }
                    worst = worst.max(acc.norm());
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }
}

impl From<&DiagonalOperator> for DenseOperator {
    fn from(d: &DiagonalOperator) -> Self {
        let dim = d.phases.len();
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for x in 0..dim {
            entries[x * dim + x] = d.eigenvalue(x);
        }
        Self { n: d.n, entries }
    }
}

impl Operator for DenseOperator {
    fn n(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &StateVector) -> Result<StateVector> {
        self.check_dim(v)?;
        let dim = self.dim();
        let x = v.amplitudes();
        let amps = self
            .entries
            .par_chunks(dim)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect();
        StateVector::from_amplitudes(amps)
    }
}

/// Haar-like random unitary: Gaussian complex matrix orthonormalized column by
/// column (modified Gram-Schmidt, two passes). Deterministic in `seed`.
pub fn random_unitary(n: usize, seed: u64) -> Result<DenseOperator> {
    use rand::Rng;
    Limits::default().check_dense(n)?;
    let dim = 1usize << n;
    let mut rng = crate::seed::rng(seed, crate::seed::INSTANCE, n as u64);
    // column-major working copy
    let mut cols: Vec<Vec<Complex64>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect()
        })
        .collect();
    for j in 0..dim {
        for _pass in 0..2 {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let q = &done[k];
                let c = &mut rest[0];
                let proj: Complex64 = q.iter().zip(c.iter()).map(|(a, b)| a.conj() * b).sum();
                for (ci, qi) in c.iter_mut().zip(q) {
                    *ci -= proj * qi;
                }
            }
        }
        let norm = cols[j].iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut cols[j] {
            *a /= norm;
        }
    }
    let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
    for (j, col) in cols.iter().enumerate() {
        for (i, &a) in col.iter().enumerate() {
            entries[i * dim + j] = a;
        }
    }
    DenseOperator::new(n, entries)
}

/// A diagonal phase gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Gate {
    /// diag(e^{i·phase0}, e^{i·phase1}) on `qubit`.
    SinglePhase {
        qubit: usize,
        phase0: f64,
        phase1: f64,
    },
    /// Identity when `control` is 0; otherwise diag(e^{i·phase10}, e^{i·phase11})
    /// on `target`.
    ControlledPhase {
        control: usize,
        target: usize,
        phase10: f64,
        phase11: f64,
    },
}

impl Gate {
    /// Phase this gate contributes at basis index `x`.
    pub fn phase_at(&self, x: usize) -> f64 {
        match *self {
            Gate::SinglePhase {
                qubit,
                phase0,
                phase1,
            } => {
                if x >> qubit & 1 == 0 {
                    phase0
                } else {
                    phase1
                }
            }
            Gate::ControlledPhase {
                control,
                target,
                phase10,
                phase11,
            } => {
                if x >> control & 1 == 0 {
                    0.0
                } else if x >> target & 1 == 0 {
                    phase10
                } else {
                    phase11
                }
            }
        }
    }

    fn qubits_ok(&self, n: usize) -> bool {
        match *self {
            Gate::SinglePhase { qubit, .. } => qubit < n,
            Gate::ControlledPhase {
                control, target, ..
            } => control < n && target < n && control != target,
        }
    }
}

/// An ordered list of diagonal phase gates on `n` qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCircuit {
    n: usize,
    gates: Vec<Gate>,
}

impl PhaseCircuit {
    pub fn new(n: usize, gates: Vec<Gate>) -> Result<Self> {
        Limits::default().check_state(n)?;
        let mut c = Self {
            n,
            gates: Vec::with_capacity(gates.len()),
        };
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::new(n, Vec::new())
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        if !gate.qubits_ok(self.n) {
            return Err(Error::InvalidInstance(format!(
                "gate {gate:?} is not valid on {} qubits",
                self.n
            )));
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }
}

impl Operator for PhaseCircuit {
    fn n(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &StateVector) -> Result<StateVector> {
        self.check_dim(v)?;
        let mut out = v.clone();
        for gate in &self.gates {
            let amps = out.amplitudes_mut();
            match *gate {
                Gate::SinglePhase {
                    qubit,
                    phase0,
                    phase1,
                } => {
                    let f = [
                        Complex64::from_polar(1.0, phase0),
                        Complex64::from_polar(1.0, phase1),
                    ];
                    amps.par_iter_mut()
                        .enumerate()
                        .for_each(|(x, a)| *a *= f[x >> qubit & 1]);
                }
                Gate::ControlledPhase {
                    control,
                    target,
                    phase10,
                    phase11,
                } => {
                    let f = [
                        Complex64::from_polar(1.0, phase10),
                        Complex64::from_polar(1.0, phase11),
                    ];
                    amps.par_iter_mut().enumerate().for_each(|(x, a)| {
                        if x >> control & 1 == 1 {
                            *a *= f[x >> target & 1];
                        }
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Expand a phase circuit into its diagonal. Each entry is the sum of gate
/// contributions, reduced into (-π, π].
pub fn circuit_to_diagonal(c: &PhaseCircuit) -> Result<DiagonalOperator> {
    circuit_to_diagonal_with(c, &Limits::default())
}

pub fn circuit_to_diagonal_with(c: &PhaseCircuit, limits: &Limits) -> Result<DiagonalOperator> {
    limits.check_brute_force(c.n)?;
    let phases = (0..1usize << c.n)
        .into_par_iter()
        .map(|x| wrap_phase(c.gates.iter().map(|g| g.phase_at(x)).sum()))
        .collect();
    Ok(DiagonalOperator { n: c.n, phases })
}

/// Owned operator of any supported representation.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyOperator {
    Diagonal(DiagonalOperator),
    Dense(DenseOperator),
    Circuit(PhaseCircuit),
}

impl Operator for AnyOperator {
    fn n(&self) -> usize {
        match self {
            AnyOperator::Diagonal(d) => d.n(),
            AnyOperator::Dense(d) => d.n(),
            AnyOperator::Circuit(c) => c.n(),
        }
    }

    fn apply(&self, v: &StateVector) -> Result<StateVector> {
        match self {
            AnyOperator::Diagonal(d) => d.apply(v),
            AnyOperator::Dense(d) => d.apply(v),
            AnyOperator::Circuit(c) => c.apply(v),
        }
    }

    fn diagonal_phases(&self) -> Option<&[f64]> {
        match self {
            AnyOperator::Diagonal(d) => d.diagonal_phases(),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::equal_superposition;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_phases_is_identity() {
        let mut rng = crate::seed::rng(1, crate::seed::INIT, 0);
        let v = StateVector::random(4, &mut rng).unwrap();
        let id = DiagonalOperator::identity(4).unwrap();
        assert_eq!(id.apply(&v).unwrap(), v);
    }

    #[test]
    fn pi_phase_flips_sign() {
        let u = DiagonalOperator::new(vec![0.0, PI]).unwrap();
        let out = u.apply(&equal_superposition(1).unwrap()).unwrap();
        assert!((out.amplitudes()[0] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((out.amplitudes()[1] - c(-FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn apply_rejects_dimension_mismatch() {
        let u = DiagonalOperator::identity(2).unwrap();
        let v = equal_superposition(3).unwrap();
        assert!(matches!(u.apply(&v), Err(Error::DimensionMismatch { .. })));
        let d = random_unitary(2, 0).unwrap();
        assert!(d.apply(&v).is_err());
        let circ = PhaseCircuit::empty(2).unwrap();
        assert!(circ.apply(&v).is_err());
    }

    #[test]
    fn empty_circuit_diagonal_is_zero() {
        let d = circuit_to_diagonal(&PhaseCircuit::empty(2).unwrap()).unwrap();
        assert_eq!(d.phases(), &[0.0; 4]);
    }

    #[test]
    fn single_gate_diagonal() {
        let circ = PhaseCircuit::new(
            1,
            vec![Gate::SinglePhase {
                qubit: 0,
                phase0: 0.0,
                phase1: PI,
            }],
        )
        .unwrap();
        let d = circuit_to_diagonal(&circ).unwrap();
        assert_eq!(d.phases(), &[0.0, PI]);
    }

    #[test]
    fn controlled_gate_reads_control_then_target() {
        let circ = PhaseCircuit::new(
            2,
            vec![Gate::ControlledPhase {
                control: 1,
                target: 0,
                phase10: 0.25,
                phase11: 0.75,
            }],
        )
        .unwrap();
        let d = circuit_to_diagonal(&circ).unwrap();
        // x = q1 q0: 00, 01 -> control off; 10 -> target 0; 11 -> target 1
        assert_eq!(d.phases(), &[0.0, 0.0, 0.25, 0.75]);
    }

    #[test]
    fn circuit_validation() {
        let mut circ = PhaseCircuit::empty(2).unwrap();
        assert!(circ
            .push(Gate::SinglePhase {
                qubit: 2,
                phase0: 0.0,
                phase1: 0.0
            })
            .is_err());
        assert!(circ
            .push(Gate::ControlledPhase {
                control: 1,
                target: 1,
                phase10: 0.0,
                phase11: 0.0
            })
            .is_err());
    }

    #[test]
    fn circuit_to_diagonal_capacity() {
        let circ = PhaseCircuit::empty(21).unwrap();
        assert!(matches!(
            circuit_to_diagonal(&circ),
            Err(Error::Capacity { cap: 20, .. })
        ));
    }

    #[test]
    fn random_unitary_one_qubit_is_unitary() {
        for seed in 0..5 {
            let u = random_unitary(1, seed).unwrap();
            assert!(u.unitarity_deviation() < 1e-10);
        }
    }

    #[test]
    fn random_unitary_is_deterministic() {
        assert_eq!(
            random_unitary(3, 11).unwrap(),
            random_unitary(3, 11).unwrap()
        );
        assert_ne!(
            random_unitary(3, 11).unwrap(),
            random_unitary(3, 12).unwrap()
        );
    }

    #[test]
    fn random_unitary_capacity() {
        assert!(matches!(
            random_unitary(11, 0),
            Err(Error::Capacity { cap: 10, .. })
        ));
    }

    #[test]
    fn dense_rejects_non_unitary() {
        let m = vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        assert!(matches!(
            DenseOperator::new(1, m),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn dense_from_diagonal_matches() {
        let d = DiagonalOperator::new(vec![0.1, 0.2, -0.3, 2.0]).unwrap();
        let m = DenseOperator::from(&d);
        let mut rng = crate::seed::rng(2, crate::seed::INIT, 0);
        let v = StateVector::random(2, &mut rng).unwrap();
        let diff = d
            .apply(&v)
            .unwrap()
            .max_abs_diff(&m.apply(&v).unwrap())
            .unwrap();
        assert!(diff < 1e-15);
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!(wrap_phase(-1e-17).abs() < 1e-15);
        assert!((wrap_phase(3.0 * TAU + 0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dominant_set_of_diagonal() {
        let d = DiagonalOperator::new(vec![0.1, 1.0, 0.3, 1.0]).unwrap();
        assert_eq!(d.dominant_set(1.0, 1e-12), vec![1, 3]);
    }
}
