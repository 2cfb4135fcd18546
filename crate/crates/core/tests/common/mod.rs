//! Shared helpers for integration tests: an independent dense-matrix
//! simulator and random circuit generators.
#![allow(dead_code)]

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64 as C;
use qmlsec_core::simcore::{Circuit, GateKind, GateOp, Param};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Matrix = Vec<Vec<C>>;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Local matrix of a gate. Two-qubit matrices use local index
/// `2·bit(first target) + bit(second target)`.
pub fn local_matrix(kind: GateKind, theta: f64) -> Matrix {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let h = c(FRAC_1_SQRT_2, 0.0);
    let em = c(co, -si);
    let ep = c(co, si);
    match kind {
        GateKind::X => vec![vec![z, o], vec![o, z]],
        GateKind::Y => vec![vec![z, c(0.0, -1.0)], vec![c(0.0, 1.0), z]],
        GateKind::Z => vec![vec![o, z], vec![z, -o]],
        GateKind::H => vec![vec![h, h], vec![h, -h]],
        GateKind::RX => vec![vec![c(co, 0.0), c(0.0, -si)], vec![c(0.0, -si), c(co, 0.0)]],
        GateKind::RY => vec![vec![c(co, 0.0), c(-si, 0.0)], vec![c(si, 0.0), c(co, 0.0)]],
        GateKind::RZ => vec![vec![em, z], vec![z, ep]],
        GateKind::DELAY => vec![vec![o, z], vec![z, o]],
        GateKind::CNOT => vec![
            vec![o, z, z, z],
            vec![z, o, z, z],
            vec![z, z, z, o],
            vec![z, z, o, z],
        ],
        GateKind::CZ => vec![
            vec![o, z, z, z],
            vec![z, o, z, z],
            vec![z, z, o, z],
            vec![z, z, z, -o],
        ],
        GateKind::CRX => vec![
            vec![o, z, z, z],
            vec![z, o, z, z],
            vec![z, z, c(co, 0.0), c(0.0, -si)],
            vec![z, z, c(0.0, -si), c(co, 0.0)],
        ],
        GateKind::SWAP => vec![
            vec![o, z, z, z],
            vec![z, z, o, z],
            vec![z, o, z, z],
            vec![z, z, z, o],
        ],
        GateKind::ZZ => vec![
            vec![em, z, z, z],
            vec![z, ep, z, z],
            vec![z, z, ep, z],
            vec![z, z, z, em],
        ],
    }
}

/// Embeds a gate into the full `2^n` space, qubit 0 in the least
/// significant index bit.
pub fn full_matrix(n: usize, op: &GateOp, params: &[f64]) -> Matrix {
    let theta = match op.param {
        Some(Param::Fixed(a)) => a,
        Some(Param::Bound(k)) => params[k],
        None => 0.0,
    };
    let u = local_matrix(op.kind, theta);
    let dim = 1 << n;
    let local = |i: usize| -> usize {
        op.targets
            .iter()
            .fold(0, |acc, &q| (acc << 1) | ((i >> q) & 1))
    };
    let mask: usize = op.targets.iter().map(|&q| 1 << q).sum();
    let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            if i & !mask == j & !mask {
                *e = u[local(i)][local(j)];
            }
        }
    }
    m
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = vec![vec![c(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == c(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

/// Product of all gate matrices, last gate leftmost.
pub fn circuit_unitary(circuit: &Circuit, params: &[f64]) -> Matrix {
    let n = circuit.n_qubits();
    let dim = 1 << n;
    let mut u: Matrix = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| c(if i == j { 1.0 } else { 0.0 }, 0.0))
                .collect()
        })
        .collect();
    for op in circuit.ops() {
        u = matmul(&full_matrix(n, op, params), &u);
    }
    u
}

/// Final state from |0…0⟩: the first column of the circuit unitary.
pub fn oracle_state(circuit: &Circuit, params: &[f64]) -> Vec<C> {
    circuit_unitary(circuit, params)
        .iter()
        .map(|row| row[0])
        .collect()
}

pub fn oracle_probs(circuit: &Circuit, params: &[f64]) -> Vec<f64> {
    oracle_state(circuit, params)
        .iter()
        .map(|a| a.norm_sqr())
        .collect()
}

pub fn oracle_tvd(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

const KINDS: [GateKind; 12] = [
    GateKind::X,
    GateKind::Y,
    GateKind::Z,
    GateKind::H,
    GateKind::RX,
    GateKind::RY,
    GateKind::RZ,
    GateKind::CNOT,
    GateKind::CZ,
    GateKind::CRX,
    GateKind::SWAP,
    GateKind::ZZ,
];

pub fn random_op(rng: &mut ChaCha8Rng, n: usize) -> GateOp {
    let pool: Vec<GateKind> = KINDS
        .iter()
        .copied()
        .filter(|k| n >= 2 || k.arity() == 1)
        .collect();
    let kind = pool[rng.random_range(0..pool.len())];
    let a = rng.random_range(0..n);
    let t = rng.random_range(0.0..TAU);
    if kind.arity() == 1 {
        return match kind {
            GateKind::RX => GateOp::rx(a, t),
            GateKind::RY => GateOp::ry(a, t),
            GateKind::RZ => GateOp::rz(a, t),
            GateKind::X => GateOp::x(a),
            GateKind::Y => GateOp::y(a),
            GateKind::Z => GateOp::z(a),
            _ => GateOp::h(a),
        };
    }
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    match kind {
        GateKind::CNOT => GateOp::cnot(a, b),
        GateKind::CZ => GateOp::cz(a, b),
        GateKind::CRX => GateOp::crx(a, b, t),
        GateKind::SWAP => GateOp::swap(a, b),
        _ => GateOp::zz(a, b, t),
    }
}

/// `n` qubits, `len` gates drawn uniformly from the full gate set.
pub fn random_circuit(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Circuit {
    let ops = (0..len).map(|_| random_op(rng, n)).collect();
    Circuit::from_ops(n, ops).unwrap()
}

/// Random 4-qubit circuit of 6 to 16 gates from
/// {H, X, RX, RY, RZ, CNOT, CZ}.
pub fn obfuscation_circuit(rng: &mut ChaCha8Rng) -> Circuit {
    let mut circuit = Circuit::new(4).unwrap();
    let len = rng.random_range(6..=16);
    for _ in 0..len {
        let q = rng.random_range(0..4);
        let mut p = rng.random_range(0..3);
        if p >= q {
            p += 1;
        }
        let t = rng.random_range(0.0..TAU);
        let op = match rng.random_range(0..7) {
            0 => GateOp::h(q),
            1 => GateOp::x(q),
            2 => GateOp::rx(q, t),
            3 => GateOp::ry(q, t),
            4 => GateOp::rz(q, t),
            5 => GateOp::cnot(q, p),
            _ => GateOp::cz(q, p),
        };
        circuit.push(op).unwrap();
    }
    circuit
}

pub fn max_amplitude_error(a: &[C], b: &[C]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
