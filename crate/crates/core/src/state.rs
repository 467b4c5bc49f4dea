//! Dense state vectors over n qubits.
//!
//! Basis index `x` encodes qubit `j` in bit `j` (little-endian): qubit 0 is the
//! least significant bit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::Limits;

/// A register of `n` qubits stored as 2^n complex amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Wrap raw amplitudes. The length must be a power of two; no normalization
    /// is applied.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::DimensionMismatch {
                expected: len.next_power_of_two().max(2),
                found: len,
            });
        }
        Ok(Self {
            n: len.trailing_zeros() as usize,
            amps,
        })
    }

    /// Computational basis state |x⟩.
    pub fn basis(n: usize, x: usize) -> Result<Self> {
        Limits::default().check_state(n)?;
        let dim = 1usize << n;
        if x >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[x] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amps })
    }

    /// Normalized state with i.i.d. Gaussian amplitudes.
    pub fn random<R: rand::Rng>(n: usize, rng: &mut R) -> Result<Self> {
        use rand_distr::StandardNormal;
        Limits::default().check_state(n)?;
        let amps = (0..1usize << n)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let mut v = Self { n, amps };
        v.normalize()?;
        Ok(v)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Scale to unit norm and return the norm before scaling.
    pub fn normalize(&mut self) -> Result<f64> {
        let norm = self.norm();
        if norm < 1e-300 || !norm.is_finite() {
            return Err(Error::DegenerateIterate { norm });
        }
        let inv = 1.0 / norm;
        for a in &mut self.amps {
            *a *= inv;
        }
        Ok(norm)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn probability(&self, x: usize) -> f64 {
        self.amps[x].norm_sqr()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_same_dim(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Rotate the global phase so the largest-magnitude amplitude is real and
    /// positive. Ties go to the lowest index.
    pub fn canonicalize_phase(&mut self) {
        let mut best = 0;
        let mut best_mag = -1.0;
        for (i, a) in self.amps.iter().enumerate() {
            let m = a.norm_sqr();
            if m > best_mag * (1.0 + 1e-12) {
                best = i;
                best_mag = m;
            }
        }
        if best_mag <= 0.0 {
            return;
        }
        let pivot = self.amps[best];
        let rot = pivot.conj() / pivot.norm();
        for a in &mut self.amps {
            *a *= rot;
        }
    }

    pub fn canonicalized(&self) -> StateVector {
        let mut v = self.clone();
        v.canonicalize_phase();
        v
    }

    /// Largest elementwise modulus of the difference.
    pub fn max_abs_diff(&self, other: &StateVector) -> Result<f64> {
        self.check_same_dim(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Index with the highest probability (lowest index on ties).
    pub fn argmax_probability(&self) -> usize {
        let mut best = 0;
        let mut best_p = f64::NEG_INFINITY;
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p > best_p {
                best = i;
                best_p = p;
            }
        }
        best
    }

    pub(crate) fn check_same_dim(&self, other: &StateVector) -> Result<()> {
        if self.amps.len() != other.amps.len() {
            return Err(Error::DimensionMismatch {
                expected: self.amps.len(),
                found: other.amps.len(),
            });
        }
        Ok(())
    }
}

/// The uniform superposition H^{⊗n}|0…0⟩.
pub fn equal_superposition(n: usize) -> Result<StateVector> {
    equal_superposition_with(n, &Limits::default())
}

pub fn equal_superposition_with(n: usize, limits: &Limits) -> Result<StateVector> {
    limits.check_state(n)?;
    let dim = 1usize << n;
    // 2^{-n/2} built from exact powers of two so n = 1 gives FRAC_1_SQRT_2
    let mut scale = 0.5f64.powi((n / 2) as i32);
    if n % 2 == 1 {
        scale *= std::f64::consts::FRAC_1_SQRT_2;
    }
    let amp = Complex64::new(scale, 0.0);
    Ok(StateVector {
        n,
        amps: vec![amp; dim],
    })
}

/// Total probability of the given basis states.
pub fn success_probability(v: &StateVector, dominant: &[usize]) -> f64 {
    dominant.iter().map(|&x| v.probability(x)).sum()
}
