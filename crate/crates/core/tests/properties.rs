use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qpower::operator::{circuit_to_diagonal, phase_distance, random_unitary};
use qpower::qap::{self, AssignmentMatrix, QapInstance};
use qpower::quantum::{analytic_diagonal_iterate, hadamard_test_step, iterate};
use qpower::qubo::{self, GateConvention, QuboInstance, Sense, VariableDomain};
use qpower::{
    equal_superposition, success_probability, CollapseMode, DiagonalOperator, EngineConfig, Gate,
    Operator, PhaseCircuit, StateVector,
};

fn random_state(n: usize, seed: u64) -> StateVector {
    StateVector::random(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn qubo_strategy(max_n: usize) -> impl Strategy<Value = QuboInstance> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|j| (j + 1..n).map(move |k| (j, k)))
            .collect();
        let m = pairs.len();
        (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(prop::option::of(-5.0f64..5.0), m),
            any::<bool>(),
            any::<bool>(),
        )
            .prop_map(move |(linear, quad, max, spin)| {
                let quadratic = pairs
                    .iter()
                    .zip(quad)
                    .filter_map(|(&(j, k), q)| q.map(|q| (j, k, q)))
                    .collect();
                let sense = if max {
                    Sense::Maximize
                } else {
                    Sense::Minimize
                };
                let domain = if spin {
                    VariableDomain::Spin
                } else {
                    VariableDomain::Binary
                };
                QuboInstance::with_domain(n, linear, quadratic, sense, domain).unwrap()
            })
    })
}

fn random_qap(n: usize, seed: u64) -> QapInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = |lo: f64, hi: f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(lo..hi)).collect())
            .collect()
    };
    let f = m(0.0, 5.0);
    let d = m(0.0, 5.0);
    let b = m(-2.0, 2.0);
    QapInstance::new(f, d, b).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitaries_preserve_norm(n in 1usize..=4, seed in any::<u64>()) {
        let u = random_unitary(n, seed).unwrap();
        let v = random_state(n, seed ^ 1);
        prop_assert!((u.apply(&v).unwrap().norm() - 1.0).abs() < 1e-12);
        let phases: Vec<f64> = (0..1usize << n).map(|x| (x as f64 * 0.37 + seed as f64).sin() * 3.0).collect();
        let d = DiagonalOperator::new(phases).unwrap();
        prop_assert!((d.apply(&v).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circuit_matches_its_diagonal(q in qubo_strategy(6), seed in any::<u64>()) {
        if let Ok(plan) = qubo::make_scaling(&q, q.sense()) {
            let c = qubo::compile(&q, GateConvention::native(q.domain()), &plan).unwrap();
            let d = circuit_to_diagonal(&c).unwrap();
            let v = random_state(q.n(), seed);
            let diff = c.apply(&v).unwrap().max_abs_diff(&d.apply(&v).unwrap()).unwrap();
            prop_assert!(diff < 1e-12);
        }
    }

    #[test]
    fn gate_order_is_irrelevant(q in qubo_strategy(6), seed in any::<u64>()) {
        if let Ok(plan) = qubo::make_scaling(&q, q.sense()) {
            let c = qubo::compile(&q, GateConvention::Binary01, &plan).unwrap();
            let mut gates: Vec<Gate> = c.gates().to_vec();
            gates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let shuffled = PhaseCircuit::new(c.n(), gates).unwrap();
            let a = circuit_to_diagonal(&c).unwrap();
            let b = circuit_to_diagonal(&shuffled).unwrap();
            for (p, r) in a.phases().iter().zip(b.phases()) {
                prop_assert!(phase_distance(*p, *r) < 1e-12);
            }
        }
    }

    #[test]
    fn compiled_phases_are_scaled_objective(q in qubo_strategy(6), ising in any::<bool>()) {
        if let Ok(plan) = qubo::make_scaling(&q, q.sense()) {
            let conv = if ising { GateConvention::IsingPM } else { GateConvention::Binary01 };
            let c = qubo::compile(&q, conv, &plan).unwrap();
            prop_assert_eq!(c.len(), qubo::gate_count(q.n(), q.quadratic().len()) + 1);
            let d = circuit_to_diagonal(&c).unwrap();
            for x in 0..1usize << q.n() {
                let want = plan.phase_of(q.evaluate_index(x));
                prop_assert!(phase_distance(d.phases()[x], want) < 1e-9);
                prop_assert!((-1e-9..=std::f64::consts::FRAC_PI_2 + 1e-9).contains(&want));
            }
        }
    }

    #[test]
    fn conventions_agree(q in qubo_strategy(6)) {
        if let Ok(plan) = qubo::make_scaling(&q, q.sense()) {
            let a = circuit_to_diagonal(&qubo::compile(&q, GateConvention::Binary01, &plan).unwrap()).unwrap();
            let b = circuit_to_diagonal(&qubo::compile(&q, GateConvention::IsingPM, &plan).unwrap()).unwrap();
            for (p, r) in a.phases().iter().zip(b.phases()) {
                prop_assert!(phase_distance(*p, *r) < 1e-9);
            }
        }
    }

    #[test]
    fn reformulation_shifts_by_constant(q in qubo_strategy(6)) {
        let (other, constant) = q.reformulated();
        for x in 0..1usize << q.n() {
            prop_assert!((q.evaluate_index(x) - other.evaluate_index(x) - constant).abs() < 1e-9);
        }
    }

    #[test]
    fn sense_duality(q in qubo_strategy(6)) {
        let max = q.clone().with_sense(Sense::Maximize);
        let min_neg = q.negated().with_sense(Sense::Minimize);
        if let (Ok(p1), Ok(p2)) = (
            qubo::make_scaling(&max, Sense::Maximize),
            qubo::make_scaling(&min_neg, Sense::Minimize),
        ) {
            let a = circuit_to_diagonal(&qubo::compile(&max, GateConvention::native(q.domain()), &p1).unwrap()).unwrap();
            let b = circuit_to_diagonal(&qubo::compile(&min_neg, GateConvention::native(q.domain()), &p2).unwrap()).unwrap();
            for (p, r) in a.phases().iter().zip(b.phases()) {
                prop_assert!(phase_distance(*p, *r) < 1e-9);
            }
        }
    }

    #[test]
    fn closed_form_matches_stepping(n in 1usize..=5, k in 0usize..30, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phases: Vec<f64> = (0..1usize << n).map(|_| rng.gen_range(0.05..3.0)).collect();
        let d = DiagonalOperator::new(phases).unwrap();
        let v0 = random_state(n, seed ^ 7);
        let mut v = v0.clone();
        for _ in 0..k {
            v = hadamard_test_step(&d, &v, 1.0).unwrap().state1.unwrap();
        }
        let w = analytic_diagonal_iterate(&d, &v0, k, 1.0).unwrap();
        prop_assert!(v.canonicalized().max_abs_diff(&w.canonicalized()).unwrap() < 1e-9);
    }

    #[test]
    fn success_probability_never_decreases(n in 2usize..=6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phases: Vec<f64> = (0..1usize << n).map(|_| rng.gen_range(0.0..std::f64::consts::FRAC_PI_2)).collect();
        let d = DiagonalOperator::new(phases).unwrap();
        let dom = d.dominant_set(1.0, 0.0);
        let mut v = equal_superposition(n).unwrap();
        let mut last = success_probability(&v, &dom);
        for _ in 0..60 {
            v = hadamard_test_step(&d, &v, 1.0).unwrap().state1.unwrap();
            let p = success_probability(&v, &dom);
            prop_assert!(p >= last - 1e-12);
            last = p;
        }
    }

    #[test]
    fn qap_formulations_agree(n in 1usize..=4, seed in any::<u64>()) {
        let inst = random_qap(n, seed);
        let perms: Vec<Vec<usize>> = {
            use itertools::Itertools;
            (0..n).permutations(n).collect()
        };
        for p in perms {
            let x = AssignmentMatrix::from_permutation(&p);
            let a = qap::objective_sum(&inst, &x).unwrap();
            let b = qap::objective_trace(&inst, &x).unwrap();
            let c = qap::objective_kron(&inst, &x).unwrap();
            prop_assert!((a - b).abs() < 1e-9 && (a - c).abs() < 1e-9);
            prop_assert!((a - inst.permutation_cost(&p)).abs() < 1e-9);
        }
    }
}

#[test]
fn penalty_makes_feasible_optimum() {
    for seed in 0..10 {
        let inst = random_qap(3, seed);
        let reduced = qap::qap_to_qubo(&inst, qap::default_penalty(&inst)).unwrap();
        let (bits, value) = qubo::brute_force_optimum(&reduced.qubo).unwrap();
        let (assignment, feasible) = qap::decode_assignment(&bits, 3).unwrap();
        assert!(feasible, "seed {seed}");
        let (_, best) = qap::brute_force_qap(&inst).unwrap();
        assert!((value + reduced.constant - best).abs() < 1e-9);
        assert!((qap::objective_sum(&inst, &assignment).unwrap() - best).abs() < 1e-9);
    }
}

#[test]
fn penalized_value_matches_objective_on_permutations() {
    use itertools::Itertools;
    let inst = random_qap(3, 42);
    let reduced = qap::qap_to_qubo(&inst, qap::default_penalty(&inst)).unwrap();
    for p in (0..3).permutations(3) {
        let x = AssignmentMatrix::from_permutation(&p);
        let bits: Vec<u8> = x.rows().iter().flatten().copied().collect();
        let v = reduced.penalized_value(&bits).unwrap();
        assert!((v - inst.permutation_cost(&p)).abs() < 1e-9);
    }
}

#[test]
fn random_unitary_spectrum_on_unit_circle() {
    let u = random_unitary(3, 7).unwrap();
    let dim = 8;
    let m = DMatrix::from_fn(dim, dim, |r, c| {
        let z = u.entry(r, c);
        nalgebra::Complex::new(z.re, z.im)
    });
    let eig = m
        .schur()
        .eigenvalues()
        .expect("complex Schur form is triangular");
    assert_eq!(eig.len(), dim);
    for z in eig.iter() {
        assert!((z.norm() - 1.0).abs() < 1e-8);
    }
}

/// Frequency of outcome 1 on the first Sample-mode step across seeds versus
/// its exact probability.
#[test]
fn sample_mode_first_branch_frequency() {
    let d = DiagonalOperator::new(vec![0.3, 1.1, 2.0, 2.9]).unwrap();
    let v0 = equal_superposition(2).unwrap();
    let p1 = hadamard_test_step(&d, &v0, 1.0).unwrap().p1;
    let trials = 4000u64;
    let mut ones = 0u64;
    for seed in 0..trials {
        let cfg = EngineConfig {
            mode: CollapseMode::Sample,
            seed,
            max_iterate: 1,
            ..EngineConfig::default()
        };
        let (_, trace) = iterate(&d, &v0, &cfg, None).unwrap();
        ones += u64::from(trace.records[0].branch_taken);
    }
    let freq = ones as f64 / trials as f64;
    let sigma = (p1 * (1.0 - p1) / trials as f64).sqrt();
    assert!((freq - p1).abs() < 4.0 * sigma, "freq {freq} vs p1 {p1}");
}

/// Two-step Sample-mode paths: the probability of each branch pair is the
/// product of the branch probabilities along the path.
#[test]
fn sample_mode_two_step_mixture() {
    let d = DiagonalOperator::new(vec![0.2, 1.4]).unwrap();
    let v0 = equal_superposition(1).unwrap();
    let first = hadamard_test_step(&d, &v0, 1.0).unwrap();
    let mut expected = [0.0; 4];
    for b0 in 0..2u8 {
        let pb0 = if b0 == 0 { first.p0 } else { first.p1 };
        let next = hadamard_test_step(&d, first.state(b0).unwrap(), 1.0).unwrap();
        expected[2 * b0 as usize] = pb0 * next.p0;
        expected[2 * b0 as usize + 1] = pb0 * next.p1;
    }
    let trials = 4000u64;
    let mut counts = [0u64; 4];
    for seed in 0..trials {
        let cfg = EngineConfig {
            mode: CollapseMode::Sample,
            seed,
            max_iterate: 2,
            ..EngineConfig::default()
        };
        let (_, trace) = iterate(&d, &v0, &cfg, None).unwrap();
        let idx =
            2 * trace.records[0].branch_taken as usize + trace.records[1].branch_taken as usize;
        counts[idx] += 1;
    }
    for (c, p) in counts.iter().zip(expected) {
        let freq = *c as f64 / trials as f64;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt().max(1e-3);
        assert!((freq - p).abs() < 4.0 * sigma, "freq {freq} vs {p}");
    }
}

#[test]
fn global_phase_is_irrelevant_to_iterates() {
    let d = DiagonalOperator::new(vec![0.4, 1.3, 0.9, 2.2]).unwrap();
    let v = random_state(2, 5);
    let rot = Complex64::from_polar(1.0, 0.77);
    let w = StateVector::from_amplitudes(v.amplitudes().iter().map(|a| a * rot).collect()).unwrap();
    let a = hadamard_test_step(&d, &v, 1.0).unwrap();
    let b = hadamard_test_step(&d, &w, 1.0).unwrap();
    assert!((a.p1 - b.p1).abs() < 1e-14);
    let sa = a.state1.unwrap().canonicalized();
    let sb = b.state1.unwrap().canonicalized();
    assert!(sa.max_abs_diff(&sb).unwrap() < 1e-12);
}
