use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SecurityError;
use crate::noise::DeviceProfile;
use crate::simcore::{
    probabilities, run_circuit, total_variation_distance, Circuit, GateKind, GateOp, StateVector,
};

/// Angle used for a `ZZ` decoy while scoring candidate positions.
pub const ZZ_PROBE_ANGLE: f64 = FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMode {
    /// Simulates every candidate and scores its output TVD.
    Exhaustive,
    /// Simulation-free mean-field score.
    Heuristic,
}

/// A dummy gate placed before op `position` of the original circuit
/// (`position == len` appends it).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub position: usize,
    pub edge: (usize, usize),
    pub score: f64,
}

fn check_kind(kind: GateKind) -> Result<(), SecurityError> {
    match kind {
        GateKind::SWAP | GateKind::ZZ => Ok(()),
        other => Err(SecurityError::UnsupportedDummy(other)),
    }
}

/// Coupling edges inside the circuit's register, as sorted `(low, high)` pairs.
fn candidate_edges(
    circuit: &Circuit,
    device: &DeviceProfile,
) -> Result<Vec<(usize, usize)>, SecurityError> {
    if circuit.n_qubits() > device.n_qubits {
        return Err(SecurityError::WidthMismatch {
            circuit: circuit.n_qubits(),
            device: device.n_qubits,
        });
    }
    let mut edges: Vec<(usize, usize)> = device
        .coupling_map
        .iter()
        .map(|&(a, b)| (a.min(b), a.max(b)))
        .filter(|&(a, b)| a != b && b < circuit.n_qubits())
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Ok(edges)
}

fn probe_gate(kind: GateKind, (a, b): (usize, usize)) -> GateOp {
    match kind {
        GateKind::ZZ => GateOp::zz(a, b, ZZ_PROBE_ANGLE),
        _ => GateOp::swap(a, b),
    }
}

fn apply_op(state: &mut StateVector, op: &GateOp) -> Result<(), SecurityError> {
    state.apply_gate_mut(op, &[])?;
    Ok(())
}

fn exhaustive_scores(
    circuit: &Circuit,
    kind: GateKind,
    edges: &[(usize, usize)],
) -> Result<Vec<Candidate>, SecurityError> {
    let reference = probabilities(&run_circuit(circuit, None)?);
    let mut prefixes = Vec::with_capacity(circuit.len() + 1);
    let mut state = StateVector::zero(circuit.n_qubits())?;
    prefixes.push(state.clone());
    for op in circuit.ops() {
        apply_op(&mut state, op)?;
        prefixes.push(state.clone());
    }
    let jobs: Vec<(usize, (usize, usize))> = (0..=circuit.len())
        .flat_map(|p| edges.iter().map(move |&e| (p, e)))
        .collect();
    jobs.par_iter()
        .map(|&(position, edge)| {
            let mut s = prefixes[position].clone();
            apply_op(&mut s, &probe_gate(kind, edge))?;
            for op in &circuit.ops()[position..] {
                apply_op(&mut s, op)?;
            }
            let score = total_variation_distance(&reference, &probabilities(&s))?;
            Ok(Candidate {
                position,
                edge,
                score,
            })
        })
        .collect()
}

type Bloch = [f64; 3];

fn rotate(r: Bloch, axis: usize, t: f64) -> Bloch {
    let (c, s) = (t.cos(), t.sin());
    let [x, y, z] = r;
    match axis {
        0 => [x, c * y - s * z, s * y + c * z],
        1 => [c * x + s * z, y, -s * x + c * z],
        _ => [c * x - s * y, s * x + c * y, z],
    }
}

fn mix(p: f64, a: Bloch, b: Bloch) -> Bloch {
    [0, 1, 2].map(|i| (1.0 - p) * a[i] + p * b[i])
}

/// Mean-field step: each wire keeps its own Bloch vector and controlled or
/// coupled gates act as mixtures weighted by the partner's Z populations.
fn mean_field_step(r: &mut [Bloch], op: &GateOp) -> Result<(), SecurityError> {
    let angle = || match op.param {
        Some(p) => p.resolve(&[]).map_err(SecurityError::from),
        None => Ok(0.0),
    };
    let q = op.targets[0];
    let one = |r: &[Bloch], q: usize| (1.0 - r[q][2]) / 2.0;
    match op.kind {
        GateKind::X => r[q] = [r[q][0], -r[q][1], -r[q][2]],
        GateKind::Y => r[q] = [-r[q][0], r[q][1], -r[q][2]],
        GateKind::Z => r[q] = [-r[q][0], -r[q][1], r[q][2]],
        GateKind::H => r[q] = [r[q][2], -r[q][1], r[q][0]],
        GateKind::RX => r[q] = rotate(r[q], 0, angle()?),
        GateKind::RY => r[q] = rotate(r[q], 1, angle()?),
        GateKind::RZ => r[q] = rotate(r[q], 2, angle()?),
        GateKind::CNOT | GateKind::CRX => {
            let t = op.targets[1];
            let flipped = match op.kind {
                GateKind::CNOT => [r[t][0], -r[t][1], -r[t][2]],
                _ => rotate(r[t], 0, angle()?),
            };
            let xt = r[t][0];
            r[t] = mix(one(r, q), r[t], flipped);
            if op.kind == GateKind::CNOT {
                r[q] = [xt * r[q][0], xt * r[q][1], r[q][2]];
            }
        }
        GateKind::CZ => {
            let b = op.targets[1];
            let (za, zb) = (r[q][2], r[b][2]);
            r[q] = [zb * r[q][0], zb * r[q][1], r[q][2]];
            r[b] = [za * r[b][0], za * r[b][1], r[b][2]];
        }
        GateKind::ZZ => {
            let b = op.targets[1];
            let t = angle()?;
            let (za, zb) = (r[q][2], r[b][2]);
            let kick = |v: Bloch, z: f64| {
                let (c, s) = (t.cos(), t.sin());
                [c * v[0] - z * s * v[1], c * v[1] + z * s * v[0], v[2]]
            };
            r[q] = kick(r[q], zb);
            r[b] = kick(r[b], za);
        }
        GateKind::SWAP => r.swap(q, op.targets[1]),
        GateKind::DELAY => {}
    }
    Ok(())
}

fn displacement(before: &[Bloch], after: &[Bloch], (a, b): (usize, usize)) -> f64 {
    let d = |u: Bloch, v: Bloch| {
        u.iter()
            .zip(&v)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    d(before[a], after[a]) + d(before[b], after[b])
}

/// Simulation-free score: how far the probe gate moves the two wires' Bloch
/// vectors under a mean-field (product state) propagation of the prefix.
fn heuristic_scores(
    circuit: &Circuit,
    kind: GateKind,
    edges: &[(usize, usize)],
) -> Result<Vec<Candidate>, SecurityError> {
    let mut r = vec![[0.0, 0.0, 1.0]; circuit.n_qubits()];
    let mut out = Vec::with_capacity((circuit.len() + 1) * edges.len());
    for position in 0..=circuit.len() {
        for &edge in edges {
            let mut probed = r.clone();
            mean_field_step(&mut probed, &probe_gate(kind, edge))?;
            out.push(Candidate {
                position,
                edge,
                score: displacement(&r, &probed, edge),
            });
        }
        if let Some(op) = circuit.ops().get(position) {
            mean_field_step(&mut r, op)?;
        }
    }
    Ok(out)
}

/// Scores every (op boundary, coupling edge) pair for a dummy `kind` gate and
/// returns them best first; ties go to the earlier position, then the lower edge.
pub fn rank_insertion_points(
    circuit: &Circuit,
    device: &DeviceProfile,
    kind: GateKind,
    mode: RankMode,
) -> Result<Vec<Candidate>, SecurityError> {
    check_kind(kind)?;
    if circuit.is_empty() {
        return Err(SecurityError::EmptyCircuit);
    }
    let edges = candidate_edges(circuit, device)?;
    let mut ranked = match mode {
        RankMode::Exhaustive => exhaustive_scores(circuit, kind, &edges)?,
        RankMode::Heuristic => heuristic_scores(circuit, kind, &edges)?,
    };
    ranked.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then(x.position.cmp(&y.position))
            .then(x.edge.cmp(&y.edge))
    });
    Ok(ranked)
}

/// A requested dummy insertion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub position: usize,
    pub kind: GateKind,
    pub edge: (usize, usize),
}

/// One inserted gate, located in the obfuscated circuit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEntry {
    pub position: usize,
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub param_index: Option<usize>,
}

impl KeyEntry {
    fn gate(&self) -> GateOp {
        match self.param_index {
            Some(k) => GateOp::bound(self.kind, self.targets.clone(), k),
            None => GateOp {
                kind: self.kind,
                targets: self.targets.clone(),
                param: None,
                duration: None,
            },
        }
    }
}

/// Record of the dummy gates, ordered by position in the obfuscated circuit.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SecurityKey {
    pub entries: Vec<KeyEntry>,
}

impl SecurityKey {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("key serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SecurityError> {
        serde_json::from_str(text).map_err(|e| SecurityError::Format(e.to_string()))
    }

    /// Parameter indices of the decoy `ZZ` gates.
    pub fn decoy_params(&self) -> Vec<usize> {
        self.entries.iter().filter_map(|e| e.param_index).collect()
    }
}

/// Inserts the selected dummies. `SWAP`s are fixed gates; each `ZZ` gets a
/// fresh parameter index past the circuit's own parameters.
pub fn insert_dummy_gates(
    circuit: &Circuit,
    selections: &[Selection],
) -> Result<(Circuit, SecurityKey), SecurityError> {
    let n = circuit.n_qubits();
    for s in selections {
        check_kind(s.kind)?;
        let (a, b) = s.edge;
        if s.position > circuit.len() || a == b || a >= n || b >= n {
            return Err(SecurityError::InvalidSelection(*s));
        }
    }
    let mut sorted: Vec<&Selection> = selections.iter().collect();
    sorted.sort_by_key(|s| s.position);
    let mut next_param = circuit.num_params();
    let mut out = Circuit::new(n)?;
    let mut key = SecurityKey::default();
    let mut pending = sorted.into_iter().peekable();
    for i in 0..=circuit.len() {
        while let Some(s) = pending.next_if(|s| s.position == i) {
            let param_index = (s.kind == GateKind::ZZ).then(|| {
                next_param += 1;
                next_param - 1
            });
            let entry = KeyEntry {
                position: out.len(),
                kind: s.kind,
                targets: vec![s.edge.0, s.edge.1],
                param_index,
            };
            out.push(entry.gate())?;
            key.entries.push(entry);
        }
        if let Some(op) = circuit.ops().get(i) {
            out.push(op.clone())?;
        }
    }
    Ok((out, key))
}

/// Removes the keyed gates, last first, checking each against its record.
pub fn restore_circuit(obfuscated: &Circuit, key: &SecurityKey) -> Result<Circuit, SecurityError> {
    if key
        .entries
        .windows(2)
        .any(|w| w[0].position >= w[1].position)
    {
        return Err(SecurityError::KeyMismatch(
            "entries not in increasing position order".into(),
        ));
    }
    let mut out = obfuscated.clone();
    for e in key.entries.iter().rev() {
        match out.ops().get(e.position) {
            Some(op) if *op == e.gate() => {
                out.remove(e.position);
            }
            Some(op) => {
                return Err(SecurityError::KeyMismatch(format!(
                    "position {} holds {:?} on {:?}, key records {:?} on {:?}",
                    e.position, op.kind, op.targets, e.kind, e.targets
                )))
            }
            None => {
                return Err(SecurityError::KeyMismatch(format!(
                    "position {} beyond circuit length {}",
                    e.position,
                    out.len()
                )))
            }
        }
    }
    Ok(out)
}

/// Binds every decoy parameter of `key` to 0 and all others from `params`.
pub fn neutral_decoy_params(params: &[f64], key: &SecurityKey) -> Vec<f64> {
    let mut full = params.to_vec();
    for k in key.decoy_params() {
        if full.len() <= k {
            full.resize(k + 1, 0.0);
        }
        full[k] = 0.0;
    }
    full
}
