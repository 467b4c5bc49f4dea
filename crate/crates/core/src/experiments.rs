//! Convergence studies on random diagonal operators with a fixed eigengap.
//!
//! Each run draws a fresh seeded instance, starts from the uniform
//! superposition (every eigenvector carries probability 2^{-n}) and records
//! the first iteration at which the dominant eigenvector holds at least the
//! target probability.

use std::f64::consts::FRAC_PI_3;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::estimate_iterations;
use crate::error::{Error, Result};
use crate::operator::{DiagonalOperator, Operator};
use crate::quantum::hadamard_test_step;
use crate::state::{equal_superposition, success_probability, StateVector};

/// Distance below the second phase at which intruding phases are placed.
pub const CLAMP_EPS: f64 = 1e-9;
/// Per-run iteration budget as a multiple of the eigengap estimate.
pub const CAP_FACTOR: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GappedInstance {
    pub op: DiagonalOperator,
    pub dominant_index: usize,
    pub second_index: usize,
    pub gap: f64,
    pub phase_range: (f64, f64),
}

impl GappedInstance {
    pub fn phi1(&self) -> f64 {
        self.op.phases()[self.dominant_index]
    }

    pub fn phi2(&self) -> f64 {
        self.op.phases()[self.second_index]
    }

    pub fn n(&self) -> usize {
        self.op.phases().len().trailing_zeros() as usize
    }

    /// Eigengap iteration estimate for this instance.
    pub fn estimate(&self, eta: f64) -> Result<f64> {
        estimate_iterations(self.phi1(), self.phi2(), self.n(), eta)
    }
}

/// Uniform phases in `range`, then the runner-up is moved to exactly
/// max - gap and every other phase above it is clamped just below it.
pub fn gen_gapped_diagonal(
    n: usize,
    gap: f64,
    range: (f64, f64),
    seed: u64,
) -> Result<GappedInstance> {
    let (lo, hi) = range;
    if n < 2 {
        return Err(Error::Domain("gapped instances need n >= 2".into()));
    }
    if !(gap > 0.0 && lo < hi && gap < hi - lo) {
        return Err(Error::Domain(format!(
            "gap {gap} is infeasible for phase range [{lo}, {hi}]"
        )));
    }
    let mut rng = crate::seed::rng(seed, crate::seed::INSTANCE, n as u64);
    let mut phases: Vec<f64> = (0..1usize << n).map(|_| rng.gen_range(lo..hi)).collect();
    let top = argmax(&phases, None);
    let phi1 = phases[top];
    let phi2 = phi1 - gap;
    if phi2 < lo {
        return Err(Error::Domain(format!(
            "maximum drawn phase {phi1} leaves no room for gap {gap} above {lo}"
        )));
    }
    let second = argmax(&phases, Some(top));
    phases[second] = phi2;
    let floor = (phi2 - CLAMP_EPS).max(lo);
    for (x, p) in phases.iter_mut().enumerate() {
        if x != top && x != second && *p >= phi2 {
            *p = floor;
        }
    }
    Ok(GappedInstance {
        op: DiagonalOperator::new(phases)?,
        dominant_index: top,
        second_index: second,
        gap,
        phase_range: range,
    })
}

fn argmax(v: &[f64], skip: Option<usize>) -> usize {
    let mut best = usize::MAX;
    for (i, &p) in v.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        if best == usize::MAX || p > v[best] {
            best = i;
        }
    }
    best
}

/// Success probability of the k-th closed-form iterate, as a function of k.
///
/// Only moduli matter, so each basis state keeps ln|η - e^{iφ}| and
/// ln|v0|², and p(k) is a ratio of log-sum-exps.
pub struct SuccessCurve {
    log_shift: Vec<f64>,
    log_weight: Vec<f64>,
    dominant: Vec<usize>,
}

impl SuccessCurve {
    pub fn new(
        op: &DiagonalOperator,
        v0: &StateVector,
        dominant: &[usize],
        eta: f64,
    ) -> Result<Self> {
        crate::classical::check_eta(eta)?;
        op.check_dim(v0)?;
        if let Some(&x) = dominant.iter().find(|&&x| x >= v0.dim()) {
            return Err(Error::DimensionMismatch {
                expected: v0.dim(),
                found: x,
            });
        }
        let shift = num_complex::Complex64::new(eta, 0.0);
        let log_shift = op
            .phases()
            .iter()
            .map(|&phi| {
                (shift - num_complex::Complex64::from_polar(1.0, phi))
                    .norm()
                    .ln()
            })
            .collect();
        let log_weight = v0.amplitudes().iter().map(|a| a.norm_sqr().ln()).collect();
        Ok(Self {
            log_shift,
            log_weight,
            dominant: dominant.to_vec(),
        })
    }

    fn exponent(&self, x: usize, k: f64) -> f64 {
        let w = self.log_weight[x];
        if w == f64::NEG_INFINITY {
            return w;
        }
        // a zero shifted eigenvalue kills the component for every k ≥ 1
        if k > 0.0 && self.log_shift[x] == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        2.0 * k * self.log_shift[x] + w
    }

    pub fn at(&self, k: usize) -> f64 {
        let kf = k as f64;
        let top = (0..self.log_weight.len())
            .map(|x| self.exponent(x, kf))
            .fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return 0.0;
        }
        let total: f64 = (0..self.log_weight.len())
            .map(|x| (self.exponent(x, kf) - top).exp())
            .sum();
        let hit: f64 = self
            .dominant
            .iter()
            .map(|&x| (self.exponent(x, kf) - top).exp())
            .sum();
        hit / total
    }
}

/// Smallest k ≤ cap with success probability ≥ target under the closed-form
/// iterate, or `None`.
///
/// With the dominant set holding the maximal |η - λ|, the success probability
/// is nondecreasing in k, so the first crossing is found by doubling then
/// bisection.
pub fn iterations_to_success(
    op: &DiagonalOperator,
    v0: &StateVector,
    dominant: &[usize],
    target: f64,
    cap: usize,
    eta: f64,
) -> Result<Option<usize>> {
    let curve = SuccessCurve::new(op, v0, dominant, eta)?;
    let hits = |k: usize| curve.at(k) >= target;
    if hits(0) {
        return Ok(Some(0));
    }
    let mut lo = 0; // fails
    let mut hi = 1;
    loop {
        if hi >= cap {
            if !hits(cap) {
                return Ok(None);
            }
            hi = cap;
            break;
        }
        if hits(hi) {
            break;
        }
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if hits(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Same quantity by stepping the post-selected Hadamard test one iteration at
/// a time.
pub fn iterations_to_success_stepped(
    op: &DiagonalOperator,
    v0: &StateVector,
    dominant: &[usize],
    target: f64,
    cap: usize,
    eta: f64,
) -> Result<Option<usize>> {
    let mut v = v0.clone();
    if success_probability(&v, dominant) >= target {
        return Ok(Some(0));
    }
    for k in 1..=cap {
        v = hadamard_test_step(op, &v, eta)?
            .state1
            .ok_or(Error::DeadBranch { branch: 1 })?;
        if success_probability(&v, dominant) >= target {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fig2,
    Fig3,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub experiment: Experiment,
    pub n: usize,
    pub gap: f64,
    pub run_index: usize,
    pub seed: u64,
    /// First iteration reaching the target, or the cap when not converged.
    pub iterations: usize,
    pub converged: bool,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: Experiment,
    pub n: usize,
    pub gap: f64,
    pub runs: usize,
    pub converged_runs: usize,
    pub mean_iterations: f64,
    pub mean_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub rows: Vec<ExperimentRow>,
    pub summary: Vec<SummaryRow>,
}

/// Shared knobs of both sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub runs: usize,
    pub target: f64,
    pub range: (f64, f64),
    pub eta: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            runs: 15,
            target: 0.5,
            range: (0.0, FRAC_PI_3),
            eta: 1.0,
            seed: 0,
        }
    }
}

/// Default qubit counts for the iterations-vs-n sweep.
pub fn default_fig2_ns() -> Vec<usize> {
    (6..=16).collect()
}

pub const DEFAULT_FIG2_GAP: f64 = 0.01;
pub const DEFAULT_FIG3_N: usize = 20;
pub const LOW_MEMORY_FIG3_N: usize = 16;

pub fn default_fig3_gaps() -> Vec<f64> {
    vec![0.005, 0.01, 0.02, 0.05, 0.1]
}

fn one_run(
    experiment: Experiment,
    n: usize,
    gap: f64,
    group: u64,
    run_index: usize,
    cfg: &SweepConfig,
) -> Result<ExperimentRow> {
    let seed = crate::seed::derive(cfg.seed, experiment.name(), group << 32 | run_index as u64);
    let inst = gen_gapped_diagonal(n, gap, cfg.range, seed)?;
    let estimate = inst.estimate(cfg.eta)?;
    let cap = (CAP_FACTOR * estimate).ceil().max(1.0) as usize;
    let v0 = equal_superposition(n)?;
    let hit = iterations_to_success(
        &inst.op,
        &v0,
        &[inst.dominant_index],
        cfg.target,
        cap,
        cfg.eta,
    )?;
    Ok(ExperimentRow {
        experiment,
        n,
        gap,
        run_index,
        seed,
        iterations: hit.unwrap_or(cap),
        converged: hit.is_some(),
        estimate,
    })
}

fn summarize(rows: &[ExperimentRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    for r in rows {
        match out.last_mut() {
            Some(s) if s.n == r.n && s.gap == r.gap => {
                s.runs += 1;
                s.converged_runs += usize::from(r.converged);
                s.mean_iterations += r.iterations as f64;
                s.mean_estimate += r.estimate;
            }
            _ => out.push(SummaryRow {
                experiment: r.experiment,
                n: r.n,
                gap: r.gap,
                runs: 1,
                converged_runs: usize::from(r.converged),
                mean_iterations: r.iterations as f64,
                mean_estimate: r.estimate,
            }),
        }
    }
    for s in &mut out {
        s.mean_iterations /= s.runs as f64;
        s.mean_estimate /= s.runs as f64;
    }
    out
}

fn sweep(
    experiment: Experiment,
    groups: Vec<(usize, f64)>,
    cfg: &SweepConfig,
) -> Result<ExperimentTable> {
    if cfg.runs == 0 {
        return Err(Error::Domain("runs must be >= 1".into()));
    }
    if !(cfg.target > 0.0 && cfg.target <= 1.0) {
        return Err(Error::Domain(format!(
            "target {} not in (0, 1]",
            cfg.target
        )));
    }
    let jobs: Vec<(usize, f64, u64, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, &(n, gap))| (0..cfg.runs).map(move |r| (n, gap, g as u64, r)))
        .collect();
    let mut rows = jobs
        .into_par_iter()
        .map(|(n, gap, g, r)| one_run(experiment, n, gap, g, r, cfg))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        a.n.cmp(&b.n)
            .then(a.gap.total_cmp(&b.gap))
            .then(a.run_index.cmp(&b.run_index))
    });
    let summary = summarize(&rows);
    Ok(ExperimentTable { rows, summary })
}

/// Iterations to success versus qubit count at a fixed gap.
pub fn run_fig2(n_list: &[usize], gap: f64, cfg: &SweepConfig) -> Result<ExperimentTable> {
    sweep(
        Experiment::Fig2,
        n_list.iter().map(|&n| (n, gap)).collect(),
        cfg,
    )
}

/// Iterations to success versus gap at a fixed qubit count.
pub fn run_fig3(n: usize, gaps: &[f64], cfg: &SweepConfig) -> Result<ExperimentTable> {
    if gaps.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::Domain("gaps must be positive".into()));
    }
    sweep(
        Experiment::Fig3,
        gaps.iter().map(|&g| (n, g)).collect(),
        cfg,
    )
}

/// Least-squares line y = slope·x + intercept with its R².
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    (slope, intercept, r2)
}
