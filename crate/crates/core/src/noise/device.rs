use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NoiseError;
use crate::rng;
use crate::simcore::GateKind;

/// Crosstalk amplification applied when a coupled neighbour is driven.
pub const DEFAULT_CROSSTALK_MULTIPLIER: f64 = 3.0;

/// Error parameters of one physical qubit. Times share the unit of gate durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitNoise {
    pub t1: f64,
    pub t2: f64,
    /// P(read 1 | true 0).
    pub readout_p01: f64,
    /// P(read 0 | true 1).
    pub readout_p10: f64,
    pub gate_error_1q: f64,
    pub gate_error_2q: f64,
}

impl QubitNoise {
    pub fn noiseless() -> Self {
        Self {
            t1: 1e12,
            t2: 1e12,
            readout_p01: 0.0,
            readout_p10: 0.0,
            gate_error_1q: 0.0,
            gate_error_2q: 0.0,
        }
    }

    fn validate(&self, q: usize) -> Result<(), NoiseError> {
        let bad = |what: &str| Err(NoiseError::InvalidDevice(format!("qubit {q}: {what}")));
        if !(self.t1.is_finite() && self.t1 > 0.0) {
            return bad("t1 must be positive");
        }
        if !(self.t2.is_finite() && self.t2 > 0.0) {
            return bad("t2 must be positive");
        }
        if self.t2 > 2.0 * self.t1 * (1.0 + 1e-12) {
            return bad("t2 exceeds 2·t1");
        }
        for (name, p) in [
            ("readout_p01", self.readout_p01),
            ("readout_p10", self.readout_p10),
            ("gate_error_1q", self.gate_error_1q),
            ("gate_error_2q", self.gate_error_2q),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} = {p} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// A device: coupling graph plus per-qubit error rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: String,
    pub n_qubits: usize,
    /// Undirected edges.
    pub coupling_map: Vec<(usize, usize)>,
    pub per_qubit: Vec<QubitNoise>,
    #[serde(default = "default_multiplier")]
    pub crosstalk_multiplier: f64,
    /// Duration per gate kind; kinds not listed take zero time.
    #[serde(default)]
    pub gate_durations: BTreeMap<GateKind, f64>,
}

fn default_multiplier() -> f64 {
    DEFAULT_CROSSTALK_MULTIPLIER
}

/// Names accepted by [`DeviceProfile::builtin`].
pub const BUILTIN_PROFILES: [&str; 3] = ["ideal", "noisy-a", "noisy-b"];

impl DeviceProfile {
    pub fn validate(&self) -> Result<(), NoiseError> {
        if self.per_qubit.len() != self.n_qubits {
            return Err(NoiseError::InvalidDevice(format!(
                "{} noise records for {} qubits",
                self.per_qubit.len(),
                self.n_qubits
            )));
        }
        for &(a, b) in &self.coupling_map {
            if a >= self.n_qubits || b >= self.n_qubits || a == b {
                return Err(NoiseError::InvalidDevice(format!(
                    "invalid edge ({a}, {b})"
                )));
            }
        }
        if !(self.crosstalk_multiplier.is_finite() && self.crosstalk_multiplier >= 1.0) {
            return Err(NoiseError::InvalidDevice(format!(
                "crosstalk multiplier {} must be >= 1",
                self.crosstalk_multiplier
            )));
        }
        for (k, t) in &self.gate_durations {
            if !(t.is_finite() && *t >= 0.0) {
                return Err(NoiseError::InvalidDevice(format!("duration of {k} is {t}")));
            }
        }
        for (q, n) in self.per_qubit.iter().enumerate() {
            n.validate(q)?;
        }
        Ok(())
    }

    /// A noise-free device on `coupling_map`.
    pub fn ideal(n_qubits: usize, coupling_map: Vec<(usize, usize)>) -> Self {
        Self {
            device_id: "ideal".into(),
            n_qubits,
            coupling_map,
            per_qubit: vec![QubitNoise::noiseless(); n_qubits],
            crosstalk_multiplier: DEFAULT_CROSSTALK_MULTIPLIER,
            gate_durations: BTreeMap::new(),
        }
    }

    /// Nearest-neighbour chain `0–1–…–(n−1)`.
    pub fn line_edges(n_qubits: usize) -> Vec<(usize, usize)> {
        (1..n_qubits).map(|q| (q - 1, q)).collect()
    }

    /// Shipped example profiles. Rates are illustrative, not calibrated.
    pub fn builtin(name: &str) -> Option<Self> {
        let edges = Self::line_edges(5);
        let durations = || {
            BTreeMap::from([
                (GateKind::X, 35.0),
                (GateKind::Y, 35.0),
                (GateKind::H, 35.0),
                (GateKind::RX, 35.0),
                (GateKind::RY, 35.0),
                (GateKind::CNOT, 300.0),
                (GateKind::CZ, 300.0),
                (GateKind::CRX, 400.0),
                (GateKind::SWAP, 900.0),
                (GateKind::ZZ, 300.0),
            ])
        };
        let q = |t1: f64, t2: f64, p01: f64, p10: f64, e1: f64, e2: f64| QubitNoise {
            t1,
            t2,
            readout_p01: p01,
            readout_p10: p10,
            gate_error_1q: e1,
            gate_error_2q: e2,
        };
        match name {
            "ideal" => Some(Self::ideal(5, edges)),
            "noisy-a" => Some(Self {
                device_id: "noisy-a".into(),
                n_qubits: 5,
                coupling_map: edges,
                per_qubit: vec![
                    q(90e3, 70e3, 0.012, 0.045, 4e-4, 9e-3),
                    q(60e3, 80e3, 0.038, 0.016, 3e-4, 1.1e-2),
                    q(110e3, 95e3, 0.009, 0.052, 5e-4, 8e-3),
                    q(75e3, 40e3, 0.041, 0.011, 6e-4, 1.3e-2),
                    q(85e3, 90e3, 0.015, 0.060, 4e-4, 1.0e-2),
                ],
                crosstalk_multiplier: DEFAULT_CROSSTALK_MULTIPLIER,
                gate_durations: durations(),
            }),
            "noisy-b" => Some(Self {
                device_id: "noisy-b".into(),
                n_qubits: 5,
                coupling_map: edges,
                per_qubit: vec![
                    q(70e3, 50e3, 0.047, 0.014, 7e-4, 1.4e-2),
                    q(95e3, 100e3, 0.010, 0.049, 4e-4, 9e-3),
                    q(50e3, 60e3, 0.036, 0.012, 8e-4, 1.6e-2),
                    q(120e3, 130e3, 0.013, 0.044, 3e-4, 7e-3),
                    q(65e3, 55e3, 0.051, 0.019, 6e-4, 1.2e-2),
                ],
                crosstalk_multiplier: DEFAULT_CROSSTALK_MULTIPLIER,
                gate_durations: durations(),
            }),
            _ => None,
        }
    }

    /// A device whose per-qubit rates are drawn from seeded spreads, used to
    /// build PUF populations. Readout errors are uniform in `[0, 0.15]`.
    pub fn synthesize(
        device_id: impl Into<String>,
        n_qubits: usize,
        coupling_map: Vec<(usize, usize)>,
        seed: u64,
    ) -> Self {
        let mut rng = rng::rng(seed);
        let per_qubit = (0..n_qubits)
            .map(|_| {
                let t1 = rng.random_range(40e3..140e3);
                let t2 = rng.random_range(0.3..1.0) * 2.0 * t1;
                QubitNoise {
                    t1,
                    t2,
                    readout_p01: rng.random_range(0.0..0.15),
                    readout_p10: rng.random_range(0.0..0.15),
                    gate_error_1q: rng.random_range(1e-4..1e-3),
                    gate_error_2q: rng.random_range(5e-3..2e-2),
                }
            })
            .collect();
        Self {
            device_id: device_id.into(),
            n_qubits,
            coupling_map,
            per_qubit,
            crosstalk_multiplier: DEFAULT_CROSSTALK_MULTIPLIER,
            gate_durations: BTreeMap::from([(GateKind::H, 35.0), (GateKind::X, 35.0)]),
        }
    }

    pub fn are_coupled(&self, a: usize, b: usize) -> bool {
        self.coupling_map
            .iter()
            .any(|&(x, y)| (x == a && y == b) || (x == b && y == a))
    }

    /// Coupling-map neighbours of `q` in ascending order.
    pub fn neighbors(&self, q: usize) -> Vec<usize> {
        neighbors(&self.coupling_map, q)
    }

    pub fn duration_of(&self, kind: GateKind) -> f64 {
        self.gate_durations.get(&kind).copied().unwrap_or(0.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("device profile serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NoiseError> {
        let d: DeviceProfile =
            serde_json::from_str(text).map_err(|e| NoiseError::InvalidDevice(e.to_string()))?;
        d.validate()?;
        Ok(d)
    }
}

pub(crate) fn neighbors(edges: &[(usize, usize)], q: usize) -> Vec<usize> {
    let mut out: Vec<usize> = edges
        .iter()
        .filter_map(|&(a, b)| {
            if a == q {
                Some(b)
            } else if b == q {
                Some(a)
            } else {
                None
            }
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}
