//! Quadratic assignment: objective forms, reduction to QUBO, exact oracle.
//!
//! Facility i placed at location k is the binary variable x_ik, stored at
//! QUBO index i·n + k.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::EngineConfig;
use crate::qubo::{self, QuboInstance, Sense, Solution};

pub const BRUTE_FORCE_MAX_N: usize = 8;
/// n² qubits; n = 4 is 16 qubits.
pub const SOLVE_MAX_N: usize = 4;

type Matrix = Vec<Vec<f64>>;

/// Flow F between facilities, distance D between locations, allocation cost B
/// of facility i at location k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QapInstance {
    n: usize,
    f: Matrix,
    d: Matrix,
    b: Matrix,
}

fn check_square(name: &str, m: &Matrix, n: usize) -> Result<()> {
    if m.len() != n || m.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidInstance(format!("{name} must be {n}x{n}")));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInstance(format!(
            "{name} has non-finite entries"
        )));
    }
    Ok(())
}

impl QapInstance {
    pub fn new(f: Matrix, d: Matrix, b: Matrix) -> Result<Self> {
        let n = f.len();
        if n == 0 {
            return Err(Error::InvalidInstance("empty instance".into()));
        }
        check_square("F", &f, n)?;
        check_square("D", &d, n)?;
        check_square("B", &b, n)?;
        Ok(Self { n, f, d, b })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn flow(&self) -> &Matrix {
        &self.f
    }

    pub fn distance(&self) -> &Matrix {
        &self.d
    }

    pub fn allocation(&self) -> &Matrix {
        &self.b
    }

    /// Objective of the assignment facility i → location perm[i].
    pub fn permutation_cost(&self, perm: &[usize]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                total += self.f[i][j] * self.d[perm[i]][perm[j]];
            }
            total += self.b[i][perm[i]];
        }
        total
    }
}

/// Binary n x n matrix; x[i][k] = 1 places facility i at location k.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentMatrix {
    x: Vec<Vec<u8>>,
}

impl AssignmentMatrix {
    pub fn new(x: Vec<Vec<u8>>) -> Result<Self> {
        let n = x.len();
        if x.iter().any(|r| r.len() != n) || x.iter().flatten().any(|&v| v > 1) {
            return Err(Error::InvalidInstance(
                "assignment must be a square 0/1 matrix".into(),
            ));
        }
        Ok(Self { x })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            x: vec![vec![0; n]; n],
        }
    }

    pub fn from_permutation(perm: &[usize]) -> Self {
        let n = perm.len();
        let mut m = Self::zeros(n);
        for (i, &k) in perm.iter().enumerate() {
            m.x[i][k] = 1;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn get(&self, i: usize, k: usize) -> u8 {
        self.x[i][k]
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.x
    }

    /// Every row and every column sums to one.
    pub fn is_feasible(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| self.x[i].iter().map(|&v| u32::from(v)).sum::<u32>() == 1)
            && (0..n).all(|k| (0..n).map(|i| u32::from(self.x[i][k])).sum::<u32>() == 1)
    }

    /// Location of each facility when feasible.
    pub fn to_permutation(&self) -> Option<Vec<usize>> {
        if !self.is_feasible() {
            return None;
        }
        Some(
            self.x
                .iter()
                .map(|row| row.iter().position(|&v| v == 1).expect("feasible row"))
                .collect(),
        )
    }

    fn as_f64(&self) -> Matrix {
        self.x
            .iter()
            .map(|r| r.iter().map(|&v| f64::from(v)).collect())
            .collect()
    }
}

fn check_dims(inst: &QapInstance, x: &AssignmentMatrix) -> Result<()> {
    if x.n() != inst.n {
        return Err(Error::DimensionMismatch {
            expected: inst.n,
            found: x.n(),
        });
    }
    Ok(())
}

/// Σ_{i,j} Σ_{k,p} f_ij d_kp x_ik x_jp + Σ_{i,k} b_ik x_ik.
pub fn objective_sum(inst: &QapInstance, x: &AssignmentMatrix) -> Result<f64> {
    check_dims(inst, x)?;
    let n = inst.n;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for p in 0..n {
                    if x.get(i, k) == 1 && x.get(j, p) == 1 {
                        total += inst.f[i][j] * inst.d[k][p];
                    }
                }
            }
        }
    }
    for i in 0..n {
        for k in 0..n {
            total += inst.b[i][k] * f64::from(x.get(i, k));
        }
    }
    Ok(total)
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

fn transpose(a: &Matrix) -> Matrix {
    (0..a[0].len())
        .map(|j| a.iter().map(|row| row[j]).collect())
        .collect()
}

fn trace(a: &Matrix) -> f64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

/// trace(F X Dᵀ Xᵀ + B Xᵀ) over permutation matrices.
pub fn objective_trace(inst: &QapInstance, x: &AssignmentMatrix) -> Result<f64> {
    check_dims(inst, x)?;
    if !x.is_feasible() {
        return Err(Error::Infeasible(
            "trace form is defined on permutation matrices".into(),
        ));
    }
    let xm = x.as_f64();
    let xt = transpose(&xm);
    let quad = matmul(&matmul(&matmul(&inst.f, &xm), &transpose(&inst.d)), &xt);
    let lin = matmul(&inst.b, &xt);
    Ok(trace(&quad) + trace(&lin))
}

/// Stack the rows of `m` into one vector (the column-major vec of mᵀ).
pub fn vec_rows(m: &Matrix) -> Vec<f64> {
    m.iter().flatten().copied().collect()
}

/// Kronecker product A ⊗ B.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, ca, rb, cb) = (a.len(), a[0].len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; ca * cb]; ra * rb];
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    out[i * rb + k][j * cb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// vᵀ (F ⊗ D) v + vec(B)ᵀ v with v = vec(Xᵀ), i.e. entry i·n + k is x_ik.
pub fn objective_kron(inst: &QapInstance, x: &AssignmentMatrix) -> Result<f64> {
    check_dims(inst, x)?;
    let v = vec_rows(&x.as_f64());
    let k = kron(&inst.f, &inst.d);
    let quad: f64 = (0..v.len())
        .map(|r| v[r] * (0..v.len()).map(|c| k[r][c] * v[c]).sum::<f64>())
        .sum();
    let lin: f64 = vec_rows(&inst.b).iter().zip(&v).map(|(b, x)| b * x).sum();
    Ok(quad + lin)
}

/// A QAP rewritten as an n²-variable minimization QUBO.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QapQubo {
    pub qubo: QuboInstance,
    pub penalty: f64,
    /// Additive constant of the constraint expansion (2nP); QUBO value plus
    /// this constant is the QAP objective on feasible assignments.
    pub constant: f64,
    pub n: usize,
}

impl QapQubo {
    /// QAP objective plus constraint penalty at a QUBO assignment.
    pub fn penalized_value(&self, bits: &[u8]) -> Result<f64> {
        Ok(self.qubo.evaluate(bits)? + self.constant)
    }
}

/// Objective coefficients on the x_ik variables, before constraints:
/// (linear, quadratic over index pairs u < w).
fn objective_coefficients(inst: &QapInstance) -> (Vec<f64>, Vec<(usize, usize, f64)>) {
    let n = inst.n;
    let nv = n * n;
    let mut lin = vec![0.0; nv];
    let mut quad = vec![vec![0.0; nv]; nv];
    for i in 0..n {
        for k in 0..n {
            lin[i * n + k] += inst.b[i][k];
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for p in 0..n {
                    let c = inst.f[i][j] * inst.d[k][p];
                    let (u, w) = (i * n + k, j * n + p);
                    if u == w {
                        lin[u] += c;
                    } else {
                        quad[u.min(w)][u.max(w)] += c;
                    }
                }
            }
        }
    }
    let pairs = (0..nv)
        .flat_map(|u| (u + 1..nv).map(move |w| (u, w)))
        .map(|(u, w)| (u, w, quad[u][w]))
        .collect();
    (lin, pairs)
}

/// Coefficient-sign spread (upper - lower) of the unconstrained objective.
pub fn objective_spread(inst: &QapInstance) -> f64 {
    let (lin, quad) = objective_coefficients(inst);
    lin.iter()
        .copied()
        .chain(quad.iter().map(|t| t.2))
        .map(f64::abs)
        .sum()
}

/// 2·spread + 1.
pub fn default_penalty(inst: &QapInstance) -> f64 {
    2.0 * objective_spread(inst) + 1.0
}

/// Objective plus P·Σ_rows(Σx - 1)² + P·Σ_cols(Σx - 1)², with the constant
/// 2nP split off. Zero quadratic coefficients are dropped.
pub fn qap_to_qubo(inst: &QapInstance, penalty: f64) -> Result<QapQubo> {
    let required = objective_spread(inst);
    if !(penalty > required) {
        return Err(Error::PenaltyTooSmall {
            given: penalty,
            required,
        });
    }
    let n = inst.n;
    let nv = n * n;
    let (mut lin, pairs) = objective_coefficients(inst);
    let mut quad: Vec<Vec<f64>> = vec![vec![0.0; nv]; nv];
    for (u, w, c) in pairs {
        quad[u][w] = c;
    }
    // (Σ x - 1)² = Σ x + 2 Σ_{a<b} x_a x_b - 2 Σ x + 1 over each row and column
    for line in 0..n {
        let row: Vec<usize> = (0..n).map(|k| line * n + k).collect();
        let col: Vec<usize> = (0..n).map(|i| i * n + line).collect();
        for members in [row, col] {
            for (a, &u) in members.iter().enumerate() {
                lin[u] -= penalty;
                for &w in &members[a + 1..] {
                    quad[u.min(w)][u.max(w)] += 2.0 * penalty;
                }
            }
        }
    }
    let quadratic = (0..nv)
        .flat_map(|u| (u + 1..nv).map(move |w| (u, w)))
        .filter(|&(u, w)| quad[u][w] != 0.0)
        .map(|(u, w)| (u, w, quad[u][w]))
        .collect();
    let qubo = QuboInstance::new(nv, lin, quadratic, Sense::Minimize)?;
    Ok(QapQubo {
        qubo,
        penalty,
        constant: 2.0 * n as f64 * penalty,
        n,
    })
}

/// Read x_ik from bit i·n + k.
pub fn decode_assignment(bits: &[u8], n: usize) -> Result<(AssignmentMatrix, bool)> {
    if bits.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: bits.len(),
        });
    }
    let x = AssignmentMatrix {
        x: bits
            .chunks(n)
            .map(|c| c.iter().map(|&b| u8::from(b != 0)).collect())
            .collect(),
    };
    let feasible = x.is_feasible();
    Ok((x, feasible))
}

/// Exact minimum over all n! permutations; ties keep the lexicographically
/// smallest permutation.
pub fn brute_force_qap(inst: &QapInstance) -> Result<(Vec<usize>, f64)> {
    if inst.n > BRUTE_FORCE_MAX_N {
        return Err(Error::Capacity {
            what: "brute-force QAP",
            n: inst.n,
            cap: BRUTE_FORCE_MAX_N,
        });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for perm in (0..inst.n).permutations(inst.n) {
        let v = inst.permutation_cost(&perm);
        if best.as_ref().is_none_or(|(_, b)| v < *b) {
            best = Some((perm, v));
        }
    }
    Ok(best.expect("n >= 1"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QapSolution {
    pub assignment: AssignmentMatrix,
    pub feasible: bool,
    pub permutation: Option<Vec<usize>>,
    /// QAP objective of the decoded assignment, when feasible.
    pub value: Option<f64>,
    pub penalty: f64,
    pub qubo: Solution,
}

/// Reduce to QUBO, solve with the power iteration and decode.
pub fn solve_qap(
    inst: &QapInstance,
    penalty: Option<f64>,
    cfg: &EngineConfig,
) -> Result<QapSolution> {
    if inst.n > SOLVE_MAX_N {
        return Err(Error::Capacity {
            what: "QAP solve (n² qubits)",
            n: inst.n,
            cap: SOLVE_MAX_N,
        });
    }
    let reduced = qap_to_qubo(inst, penalty.unwrap_or_else(|| default_penalty(inst)))?;
    let sol = qubo::solve(&reduced.qubo, cfg)?;
    let (assignment, feasible) = decode_assignment(&sol.bitstring, inst.n)?;
    let permutation = assignment.to_permutation();
    let value = if feasible {
        Some(objective_sum(inst, &assignment)?)
    } else {
        None
    };
    Ok(QapSolution {
        assignment,
        feasible,
        permutation,
        value,
        penalty: reduced.penalty,
        qubo: sol,
    })
}
