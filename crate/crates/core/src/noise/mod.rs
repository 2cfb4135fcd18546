//! Monte Carlo wavefunction trajectories over a [`DeviceProfile`].
//!
//! One trajectory runs the circuit gate by gate. After each gate a symmetric
//! Pauli error may strike its targets (probability from
//! [`effective_gate_error`]), then each target decoheres for the gate's
//! duration through a stochastic amplitude-damping jump and a pure-dephasing
//! Z kick. The final state is sampled once in the Z basis and passed through
//! the readout channel.
//!
//! A draw is consumed only when the corresponding probability is nonzero, so
//! a noise-free device reproduces [`crate::simcore::sample_counts`] exactly.

mod device;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use device::{DeviceProfile, QubitNoise, BUILTIN_PROFILES, DEFAULT_CROSSTALK_MULTIPLIER};

use crate::rng::{derive_seed, rng};
use crate::simcore::{sample_index, Circuit, Counts, GateKind, GateOp, SimError, StateVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid device profile: {0}")]
    InvalidDevice(String),
    #[error("circuit needs {circuit} qubits but device has {device}")]
    WidthMismatch { circuit: usize, device: usize },
    #[error("bitstring length {got} does not match {expected} qubits")]
    LengthMismatch { expected: usize, got: usize },
}

/// Qubits driven in parallel with the circuit's own gates.
#[derive(Debug, Clone, PartialEq)]
pub enum ConcurrentSchedule {
    /// The same qubits are driven during every op.
    Constant(Vec<usize>),
    /// Entry `i` lists the qubits driven during op `i`.
    PerOp(Vec<Vec<usize>>),
}

impl ConcurrentSchedule {
    fn at(&self, op_index: usize) -> &[usize] {
        match self {
            ConcurrentSchedule::Constant(q) => q,
            ConcurrentSchedule::PerOp(v) => v.get(op_index).map(Vec::as_slice).unwrap_or(&[]),
        }
    }
}

/// Depolarizing probability of `gate` on `device`, amplified by the
/// crosstalk multiplier when a coupled neighbour of a target is in
/// `concurrent`. `DELAY` carries no gate error.
pub fn effective_gate_error(device: &DeviceProfile, gate: &GateOp, concurrent: &[usize]) -> f64 {
    let base = match gate.kind {
        GateKind::DELAY => return 0.0,
        k if k.arity() == 1 => device.per_qubit[gate.targets[0]].gate_error_1q,
        _ => gate
            .targets
            .iter()
            .map(|&q| device.per_qubit[q].gate_error_2q)
            .fold(0.0, f64::max),
    };
    let crosstalk = gate.targets.iter().any(|&t| {
        concurrent
            .iter()
            .any(|&c| !gate.targets.contains(&c) && device.are_coupled(t, c))
    });
    let p = if crosstalk {
        base * device.crosstalk_multiplier
    } else {
        base
    };
    p.clamp(0.0, 1.0)
}

fn check_width(circuit: &Circuit, device: &DeviceProfile) -> Result<(), NoiseError> {
    if circuit.n_qubits() > device.n_qubits {
        return Err(NoiseError::WidthMismatch {
            circuit: circuit.n_qubits(),
            device: device.n_qubits,
        });
    }
    Ok(())
}

/// Draws `u < p`, consuming randomness only when `p > 0`.
fn event(rng: &mut ChaCha8Rng, p: f64) -> bool {
    p > 0.0 && rng.random::<f64>() < p
}

const PAULIS: [GateKind; 3] = [GateKind::X, GateKind::Y, GateKind::Z];

fn decohere(state: &mut StateVector, q: usize, t: f64, noise: &QubitNoise, rng: &mut ChaCha8Rng) {
    if t <= 0.0 {
        return;
    }
    let gamma = 1.0 - (-t / noise.t1).exp();
    if gamma > 0.0 {
        let p_jump = gamma * state.prob_one(q);
        let jump = event(rng, p_jump);
        let mask = 1usize << q;
        let keep = (1.0 - gamma).sqrt();
        let amps = state.amps_mut();
        for i in 0..amps.len() {
            if i & mask != 0 {
                if jump {
                    amps[i & !mask] = amps[i];
                    amps[i] = Complex64::new(0.0, 0.0);
                } else {
                    amps[i] *= keep;
                }
            }
        }
        state.renormalize();
    }
    let dephasing_rate = 1.0 / noise.t2 - 0.5 / noise.t1;
    if dephasing_rate > 0.0 {
        let pz = 0.5 * (1.0 - (-t * dephasing_rate).exp());
        if event(rng, pz) {
            state.apply_kind(GateKind::Z, &[q], 0.0);
        }
    }
}

fn flip_readout(outcome: usize, n: usize, device: &DeviceProfile, rng: &mut ChaCha8Rng) -> usize {
    let mut out = outcome;
    for q in 0..n {
        let noise = &device.per_qubit[q];
        let p = if (outcome >> q) & 1 == 1 {
            noise.readout_p10
        } else {
            noise.readout_p01
        };
        if event(rng, p) {
            out ^= 1 << q;
        }
    }
    out
}

/// Runs one noisy trajectory and returns the measured outcome index over the
/// device register (qubit 0 in the least significant bit).
pub fn trajectory_run(
    circuit: &Circuit,
    device: &DeviceProfile,
    seed: u64,
    concurrent: Option<&ConcurrentSchedule>,
) -> Result<usize, NoiseError> {
    trajectory_run_bound(circuit, &[], device, seed, concurrent)
}

/// [`trajectory_run`] with parameter bindings resolved from `params`.
pub fn trajectory_run_bound(
    circuit: &Circuit,
    params: &[f64],
    device: &DeviceProfile,
    seed: u64,
    concurrent: Option<&ConcurrentSchedule>,
) -> Result<usize, NoiseError> {
    device.validate()?;
    check_width(circuit, device)?;
    Ok(run_trajectory(circuit, params, device, seed, concurrent)?)
}

fn run_trajectory(
    circuit: &Circuit,
    params: &[f64],
    device: &DeviceProfile,
    seed: u64,
    concurrent: Option<&ConcurrentSchedule>,
) -> Result<usize, SimError> {
    let n = device.n_qubits;
    let mut rng = rng(seed);
    let mut state = StateVector::zero(n)?;
    for (i, op) in circuit.ops().iter().enumerate() {
        let angle = match op.param {
            Some(p) => p.resolve(params)?,
            None => 0.0,
        };
        state.apply_kind(op.kind, &op.targets, angle);

        let driven = concurrent.map(|s| s.at(i)).unwrap_or(&[]);
        if event(&mut rng, effective_gate_error(device, op, driven)) {
            for &q in &op.targets {
                let pauli = PAULIS[rng.random_range(0..3)];
                state.apply_kind(pauli, &[q], 0.0);
            }
        }

        let t = match op.duration {
            Some(t) => t,
            None => device.duration_of(op.kind),
        };
        for &q in &op.targets {
            decohere(&mut state, q, t, &device.per_qubit[q], &mut rng);
        }
    }
    let probs: Vec<f64> = state.amplitudes().iter().map(|a| a.norm_sqr()).collect();
    let outcome = sample_index(&probs, rng.random());
    Ok(flip_readout(outcome, n, device, &mut rng))
}

/// `shots` independent trajectories; trajectory `k` is seeded with
/// `derive_seed(seed, k)`.
pub fn run_noisy_counts(
    circuit: &Circuit,
    device: &DeviceProfile,
    shots: u64,
    seed: u64,
) -> Result<Counts, NoiseError> {
    run_noisy_counts_with(circuit, &[], device, shots, seed, None)
}

pub fn run_noisy_counts_with(
    circuit: &Circuit,
    params: &[f64],
    device: &DeviceProfile,
    shots: u64,
    seed: u64,
    concurrent: Option<&ConcurrentSchedule>,
) -> Result<Counts, NoiseError> {
    if shots == 0 {
        return Err(SimError::ZeroShots.into());
    }
    device.validate()?;
    check_width(circuit, device)?;
    let outcomes = (0..shots)
        .into_par_iter()
        .map(|k| run_trajectory(circuit, params, device, derive_seed(seed, k), concurrent))
        .collect::<Result<Vec<_>, _>>()?;
    let mut counts = Counts::new();
    for o in outcomes {
        *counts.entry(o).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Independent per-qubit readout flips with the device's `p01`/`p10`.
pub fn apply_readout_error(
    bits: &[bool],
    device: &DeviceProfile,
    seed: u64,
) -> Result<Vec<bool>, NoiseError> {
    if bits.len() != device.n_qubits {
        return Err(NoiseError::LengthMismatch {
            expected: device.n_qubits,
            got: bits.len(),
        });
    }
    device.validate()?;
    let index = bits_to_index(bits);
    let flipped = flip_readout(index, bits.len(), device, &mut rng(seed));
    Ok(index_to_bits(flipped, bits.len()))
}

pub fn bits_to_index(bits: &[bool]) -> usize {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (q, &b)| acc | ((b as usize) << q))
}

pub fn index_to_bits(index: usize, n: usize) -> Vec<bool> {
    (0..n).map(|q| (index >> q) & 1 == 1).collect()
}
