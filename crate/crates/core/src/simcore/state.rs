use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::circuit::Circuit;
use super::gate::{GateKind, GateOp};
use super::{SimError, MAX_QUBITS, NORM_TOLERANCE};
use crate::rng::rng_for;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub type Matrix2 = [[Complex64; 2]; 2];

/// Dense amplitude vector of an `n`-qubit register.
///
/// Basis index `i` encodes qubit `q` in bit `q` of `i` (qubit 0 is the least
/// significant bit).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self, SimError> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self, SimError> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits(n_qubits));
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(SimError::InvalidValue(format!(
                "basis index {index} >= {dim}"
            )));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { n_qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, SimError> {
        let dim = amps.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(SimError::InvalidValue(format!(
                "amplitude count {dim} is not a power of two"
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits(n_qubits));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(SimError::NotNormalized(norm));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    /// Returns `U·self` for the gate's unitary.
    pub fn apply_gate(&self, gate: &GateOp) -> Result<StateVector, SimError> {
        let mut out = self.clone();
        out.apply_gate_mut(gate, &[])?;
        Ok(out)
    }

    /// In-place variant resolving bound parameters from `params`.
    pub fn apply_gate_mut(&mut self, gate: &GateOp, params: &[f64]) -> Result<(), SimError> {
        gate.validate(self.n_qubits)?;
        let angle = match gate.param {
            Some(p) => p.resolve(params)?,
            None => 0.0,
        };
        self.apply_kind(gate.kind, &gate.targets, angle);
        Ok(())
    }

    /// Applies a gate whose targets were already validated.
    pub(crate) fn apply_kind(&mut self, kind: GateKind, t: &[usize], angle: f64) {
        match kind {
            GateKind::X | GateKind::Y | GateKind::Z | GateKind::H => {
                self.apply_1q(t[0], &fixed_matrix(kind))
            }
            GateKind::RX => self.apply_1q(t[0], &rx_matrix(angle)),
            GateKind::RY => self.apply_1q(t[0], &ry_matrix(angle)),
            GateKind::RZ => self.apply_1q(t[0], &rz_matrix(angle)),
            GateKind::CNOT => self.apply_controlled(t[0], t[1], &fixed_matrix(GateKind::X)),
            GateKind::CRX => self.apply_controlled(t[0], t[1], &rx_matrix(angle)),
            GateKind::CZ => {
                let mask = (1 << t[0]) | (1 << t[1]);
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *a = -*a;
                    }
                }
            }
            GateKind::SWAP => {
                let (ma, mb) = (1usize << t[0], 1usize << t[1]);
                for i in 0..self.amps.len() {
                    if i & ma != 0 && i & mb == 0 {
                        self.amps.swap(i, (i & !ma) | mb);
                    }
                }
            }
            GateKind::ZZ => {
                let same = Complex64::from_polar(1.0, -angle / 2.0);
                let diff = Complex64::from_polar(1.0, angle / 2.0);
                let (a, b) = (t[0], t[1]);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    let odd = ((i >> a) ^ (i >> b)) & 1 == 1;
                    *amp *= if odd { diff } else { same };
                }
            }
            GateKind::DELAY => {}
        }
    }

    pub(crate) fn apply_1q(&mut self, q: usize, m: &Matrix2) {
        let mask = 1usize << q;
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let j = i | mask;
                let (a, b) = (self.amps[i], self.amps[j]);
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[j] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    fn apply_controlled(&mut self, control: usize, target: usize, m: &Matrix2) {
        let (cm, tm) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                let j = i | tm;
                let (a, b) = (self.amps[i], self.amps[j]);
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[j] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    /// Probability that `qubit` reads 1.
    pub fn prob_one(&self, qubit: usize) -> f64 {
        let mask = 1usize << qubit;
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    pub(crate) fn renormalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            for a in &mut self.amps {
                *a /= n;
            }
        }
    }
}

pub fn fixed_matrix(kind: GateKind) -> Matrix2 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        GateKind::X => [[ZERO, ONE], [ONE, ZERO]],
        GateKind::Y => [[ZERO, -I], [I, ZERO]],
        GateKind::Z => [[ONE, ZERO], [ZERO, -ONE]],
        GateKind::H => [
            [Complex64::new(h, 0.0), Complex64::new(h, 0.0)],
            [Complex64::new(h, 0.0), Complex64::new(-h, 0.0)],
        ],
        _ => [[ONE, ZERO], [ZERO, ONE]],
    }
}

pub fn rx_matrix(theta: f64) -> Matrix2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
        [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
    ]
}

pub fn ry_matrix(theta: f64) -> Matrix2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub fn rz_matrix(theta: f64) -> Matrix2 {
    [
        [Complex64::from_polar(1.0, -theta / 2.0), ZERO],
        [ZERO, Complex64::from_polar(1.0, theta / 2.0)],
    ]
}

/// Runs `circuit` from `init` (default `|0…0⟩`). `DELAY` is the identity.
pub fn run_circuit(circuit: &Circuit, init: Option<&StateVector>) -> Result<StateVector, SimError> {
    run_bound(circuit, &[], init)
}

/// Like [`run_circuit`], resolving parameter bindings from `params`.
pub fn run_bound(
    circuit: &Circuit,
    params: &[f64],
    init: Option<&StateVector>,
) -> Result<StateVector, SimError> {
    let mut state = match init {
        Some(s) => {
            if s.n_qubits() != circuit.n_qubits() {
                return Err(SimError::LengthMismatch {
                    expected: circuit.n_qubits(),
                    got: s.n_qubits(),
                });
            }
            s.clone()
        }
        None => StateVector::zero(circuit.n_qubits())?,
    };
    for op in circuit.ops() {
        let angle = match op.param {
            Some(p) => p.resolve(params)?,
            None => 0.0,
        };
        state.apply_kind(op.kind, &op.targets, angle);
    }
    Ok(state)
}

/// Computational-basis outcome probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, SimError> {
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(SimError::InvalidValue(
                "negative or non-finite probability".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(SimError::NotNormalized(total));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Distribution of the given qubits only; bit `j` of the result index
    /// is `qubits[j]`.
    pub fn marginal(&self, qubits: &[usize]) -> Distribution {
        let mut out = vec![0.0; 1 << qubits.len()];
        for (i, p) in self.probs.iter().enumerate() {
            out[extract_bits(i, qubits)] += p;
        }
        Distribution { probs: out }
    }
}

/// Gathers `bits[j]` of `index` into bit `j` of the result.
pub fn extract_bits(index: usize, bits: &[usize]) -> usize {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (j, &q)| acc | (((index >> q) & 1) << j))
}

pub fn probabilities(state: &StateVector) -> Distribution {
    Distribution {
        probs: state.amps.iter().map(|a| a.norm_sqr()).collect(),
    }
}

/// Outcome index → number of shots.
pub type Counts = BTreeMap<usize, u64>;

/// Index of the first cumulative weight exceeding `u · total`.
pub(crate) fn sample_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            last_nonzero = i;
        }
        acc += w;
        if target < acc {
            return i;
        }
    }
    last_nonzero
}

/// Multinomial shot sampling.
///
/// Shot `k` draws one uniform from its own stream derived from `seed`, the
/// same policy the noisy trajectory runner uses, so a noise-free device
/// reproduces these counts exactly.
pub fn sample_counts(dist: &Distribution, shots: u64, seed: u64) -> Result<Counts, SimError> {
    if shots == 0 {
        return Err(SimError::ZeroShots);
    }
    let mut counts = Counts::new();
    for k in 0..shots {
        let u: f64 = rng_for(seed, k).random();
        *counts.entry(sample_index(&dist.probs, u)).or_insert(0) += 1;
    }
    Ok(counts)
}

/// `⟨Z⟩` of one qubit.
pub fn expectation_z(state: &StateVector, qubit: usize) -> Result<f64, SimError> {
    if qubit >= state.n_qubits {
        return Err(SimError::QubitOutOfRange {
            qubit,
            n_qubits: state.n_qubits,
        });
    }
    Ok((1.0 - 2.0 * state.prob_one(qubit)).clamp(-1.0, 1.0))
}

/// `⟨Z⟩` for every qubit in index order.
pub fn expectation_z_all(state: &StateVector) -> Vec<f64> {
    let n = state.n_qubits;
    let mut ones = vec![0.0; n];
    for (i, a) in state.amps.iter().enumerate() {
        let p = a.norm_sqr();
        for (q, acc) in ones.iter_mut().enumerate() {
            if (i >> q) & 1 == 1 {
                *acc += p;
            }
        }
    }
    ones.into_iter()
        .map(|p1| (1.0 - 2.0 * p1).clamp(-1.0, 1.0))
        .collect()
}

/// `(p_even, p_odd)` of the popcount restricted to `qubits`.
pub fn parity_probabilities(state: &StateVector, qubits: &[usize]) -> Result<(f64, f64), SimError> {
    if qubits.is_empty() {
        return Err(SimError::EmptyQubitSet);
    }
    let mut mask = 0usize;
    for &q in qubits {
        if q >= state.n_qubits {
            return Err(SimError::QubitOutOfRange {
                qubit: q,
                n_qubits: state.n_qubits,
            });
        }
        mask |= 1 << q;
    }
    let odd: f64 = state
        .amps
        .iter()
        .enumerate()
        .filter(|(i, _)| (i & mask).count_ones() % 2 == 1)
        .map(|(_, a)| a.norm_sqr())
        .sum();
    let odd = odd.clamp(0.0, 1.0);
    Ok((1.0 - odd, odd))
}

/// `½·Σ|p_i − q_i|`.
pub fn total_variation_distance(p: &Distribution, q: &Distribution) -> Result<f64, SimError> {
    if p.len() != q.len() {
        return Err(SimError::LengthMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let d: f64 = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((0.5 * d).clamp(0.0, 1.0))
}
