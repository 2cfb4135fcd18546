mod common;

use common::random_circuit;
use proptest::prelude::*;
use qmlsec_core::noise::{
    apply_readout_error, effective_gate_error, run_noisy_counts, run_noisy_counts_with,
    ConcurrentSchedule, DeviceProfile,
};
use qmlsec_core::rng::rng;
use qmlsec_core::simcore::{probabilities, run_circuit, sample_counts, Circuit, GateOp};
use rand::Rng;

fn grid_device(seed: u64) -> DeviceProfile {
    // 2×3 grid
    let edges = vec![(0, 1), (1, 2), (3, 4), (4, 5), (0, 3), (1, 4), (2, 5)];
    DeviceProfile::synthesize("grid", 6, edges, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zero_noise_reduces_to_exact_sampling(seed in any::<u64>(), n in 1usize..=4, len in 0usize..=15) {
        let c = random_circuit(&mut rng(seed), n, len);
        let d = DeviceProfile::ideal(n, DeviceProfile::line_edges(n));
        let noisy = run_noisy_counts(&c, &d, 500, seed).unwrap();
        let exact = sample_counts(&probabilities(&run_circuit(&c, None).unwrap()), 500, seed).unwrap();
        prop_assert_eq!(noisy, exact);
    }

    #[test]
    fn crosstalk_only_through_coupling(seed in any::<u64>(), q in 0usize..6, extra in prop::collection::vec(0usize..6, 0..4)) {
        let d = grid_device(seed);
        let mut r = rng(seed);
        let neighbours = d.neighbors(q);
        let gate = if r.random_bool(0.5) || neighbours.is_empty() {
            GateOp::h(q)
        } else {
            GateOp::cnot(q, neighbours[r.random_range(0..neighbours.len())])
        };
        let touching = |c: usize| gate.targets.iter().any(|&t| d.are_coupled(t, c));
        let far: Vec<usize> = extra
            .into_iter()
            .filter(|&c| !gate.targets.contains(&c) && !touching(c))
            .collect();
        let base = effective_gate_error(&d, &gate, &[]);
        prop_assert_eq!(effective_gate_error(&d, &gate, &far), base);
        let near: Vec<usize> = (0..6).filter(|&c| !gate.targets.contains(&c) && touching(c)).collect();
        if let Some(&c) = near.first() {
            let boosted = effective_gate_error(&d, &gate, &[c]);
            prop_assert!((boosted - (base * d.crosstalk_multiplier).min(1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn noisy_runs_are_deterministic(seed in any::<u64>(), len in 1usize..=10) {
        let c = random_circuit(&mut rng(seed), 3, len);
        let d = grid_device(seed ^ 7);
        let sched = ConcurrentSchedule::Constant(vec![5]);
        let a = run_noisy_counts_with(&c, &[], &d, 200, seed, Some(&sched)).unwrap();
        let b = run_noisy_counts_with(&c, &[], &d, 200, seed, Some(&sched)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn readout_flip_rate_is_binomial() {
    let mut d = DeviceProfile::ideal(1, vec![]);
    d.per_qubit[0].readout_p01 = 0.02;
    let n = 100_000u64;
    let flips = (0..n)
        .filter(|&k| apply_readout_error(&[false], &d, k).unwrap()[0])
        .count() as f64;
    let sigma = (n as f64 * 0.02 * 0.98).sqrt();
    assert!((flips - 0.02 * n as f64).abs() < 3.0 * sigma, "{flips}");
}

#[test]
fn bell_fidelity_falls_with_single_qubit_error() {
    // Prepare the Bell state, then undo it; fidelity is the return rate to |00⟩.
    let echo = Circuit::from_ops(
        2,
        vec![
            GateOp::h(0),
            GateOp::cnot(0, 1),
            GateOp::cnot(0, 1),
            GateOp::h(0),
        ],
    )
    .unwrap();
    let fidelity = |e: f64| {
        let mut d = DeviceProfile::ideal(2, vec![(0, 1)]);
        d.per_qubit.iter_mut().for_each(|q| q.gate_error_1q = e);
        let c = run_noisy_counts(&echo, &d, 2000, 4).unwrap();
        *c.get(&0).unwrap_or(&0) as f64 / 2000.0
    };
    let f: Vec<f64> = [0.0, 0.1, 0.3, 0.6].iter().map(|&e| fidelity(e)).collect();
    assert!(f.windows(2).all(|w| w[1] < w[0]), "{f:?}");
}
