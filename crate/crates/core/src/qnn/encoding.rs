use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::QnnError;
use crate::simcore::{Circuit, GateKind, GateOp};

/// Per-feature min–max map onto `[0, 2π]`, fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub ranges: Vec<(f64, f64)>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, QnnError> {
        let first = rows.first().ok_or(QnnError::EmptyDataset)?;
        let width = first.len();
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); width];
        for row in rows {
            if row.len() != width {
                return Err(QnnError::WidthMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
            for (r, &v) in ranges.iter_mut().zip(row) {
                if !v.is_finite() {
                    return Err(QnnError::InvalidValue(format!("non-finite feature {v}")));
                }
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        Ok(Self { ranges })
    }

    pub fn width(&self) -> usize {
        self.ranges.len()
    }

    /// Scales one row. Constant features map to π; values outside the fitted
    /// range are clamped into `[0, 2π]`.
    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>, QnnError> {
        if row.len() != self.ranges.len() {
            return Err(QnnError::WidthMismatch {
                expected: self.ranges.len(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(&self.ranges)
            .map(|(&v, &(lo, hi))| {
                if hi > lo {
                    (TAU * (v - lo) / (hi - lo)).clamp(0.0, TAU)
                } else {
                    PI
                }
            })
            .collect())
    }
}

/// Fits a [`Scaler`] on `raw` and returns the scaled rows with it.
pub fn scale_features(raw: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Scaler), QnnError> {
    let scaler = Scaler::fit(raw)?;
    let scaled = raw
        .iter()
        .map(|r| scaler.transform(r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((scaled, scaler))
}

/// Angle encoder: `H` then `RZ(f_i)` on qubit `i`, one feature per qubit.
pub fn build_encoder(features: &[f64]) -> Result<Circuit, QnnError> {
    let mut c = Circuit::new(features.len())?;
    for (q, &f) in features.iter().enumerate() {
        c.push(GateOp::h(q))?;
        c.push(GateOp::rz(q, f))?;
    }
    Ok(c)
}

pub const DEFAULT_ANSATZ: &str = "crx-ring";

/// Parametric-layer template: family name, register width and depth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub family: String,
    pub n_qubits: usize,
    pub layers: usize,
}

impl AnsatzSpec {
    pub fn new(family: &str, n_qubits: usize, layers: usize) -> Self {
        Self {
            family: family.to_string(),
            n_qubits,
            layers,
        }
    }

    pub fn crx_ring(n_qubits: usize, layers: usize) -> Self {
        Self::new(DEFAULT_ANSATZ, n_qubits, layers)
    }
}

type AnsatzBuilder = fn(usize, usize) -> Result<Circuit, QnnError>;

/// Registered ansatz families.
pub const ANSATZ_REGISTRY: &[(&str, AnsatzBuilder)] =
    &[("crx-ring", crx_ring), ("ry-cz-chain", ry_cz_chain)];

/// Ring edges `i → i+1 mod n`, with the two-qubit ring collapsed to one edge.
fn ring_edges(n: usize) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
    }
}

/// Per layer: `RX(θ)`, `RZ(θ)` on every qubit, then `CRX(θ)` around the ring.
fn crx_ring(n: usize, layers: usize) -> Result<Circuit, QnnError> {
    let mut c = Circuit::new(n)?;
    let mut k = 0;
    let mut next = || {
        k += 1;
        k - 1
    };
    for _ in 0..layers {
        for q in 0..n {
            c.push(GateOp::bound(GateKind::RX, vec![q], next()))?;
            c.push(GateOp::bound(GateKind::RZ, vec![q], next()))?;
        }
        for (a, b) in ring_edges(n) {
            c.push(GateOp::bound(GateKind::CRX, vec![a, b], next()))?;
        }
    }
    Ok(c)
}

/// Per layer: `RY(θ)` on every qubit, then a `CZ` chain.
fn ry_cz_chain(n: usize, layers: usize) -> Result<Circuit, QnnError> {
    let mut c = Circuit::new(n)?;
    let mut k = 0;
    for _ in 0..layers {
        for q in 0..n {
            c.push(GateOp::bound(GateKind::RY, vec![q], k))?;
            k += 1;
        }
        for q in 1..n {
            c.push(GateOp::cz(q - 1, q))?;
        }
    }
    Ok(c)
}

/// Builds the parametric template; bindings are numbered in circuit order.
pub fn build_ansatz(spec: &AnsatzSpec) -> Result<Circuit, QnnError> {
    if spec.layers == 0 {
        return Err(QnnError::InvalidValue(
            "ansatz needs at least one layer".into(),
        ));
    }
    let builder = ANSATZ_REGISTRY
        .iter()
        .find(|(name, _)| *name == spec.family)
        .map(|(_, b)| *b)
        .ok_or_else(|| QnnError::UnknownAnsatz(spec.family.clone()))?;
    builder(spec.n_qubits, spec.layers)
}
