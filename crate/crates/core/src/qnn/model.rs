use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoding::{build_ansatz, build_encoder, AnsatzSpec, Scaler};
use super::QnnError;
use crate::noise::{run_noisy_counts_with, DeviceProfile};
use crate::rng;
use crate::simcore::{run_bound, Circuit, StateVector};

/// Probabilities below this are clamped before taking logarithms.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// `H` then `RZ(f_i)` on qubit `i`.
    HadamardRz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Parity,
    SingleZ,
    Dense,
}

/// Classical read-out stage applied to the measured observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Class 0 ↔ even parity of all measured qubits.
    Parity,
    /// `⟨Z⟩` of qubit 0; +1 ↔ class 0, −1 ↔ class 1.
    SingleZ,
    /// Softmax over `weights · ⟨Z⟩ + biases`; `weights` is classes × qubits.
    Dense {
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
    },
}

impl Head {
    pub fn kind(&self) -> HeadKind {
        match self {
            Head::Parity => HeadKind::Parity,
            Head::SingleZ => HeadKind::SingleZ,
            Head::Dense { .. } => HeadKind::Dense,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Head::Dense { biases, .. } => biases.len(),
            _ => 2,
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            Head::Dense { weights, biases } => {
                weights.iter().map(Vec::len).sum::<usize>() + biases.len()
            }
            _ => 0,
        }
    }

    pub(crate) fn params(&self) -> Vec<f64> {
        match self {
            Head::Dense { weights, biases } => weights
                .iter()
                .flatten()
                .chain(biases.iter())
                .copied()
                .collect(),
            _ => Vec::new(),
        }
    }

    pub(crate) fn set_params(&mut self, flat: &[f64]) {
        if let Head::Dense { weights, biases } = self {
            let mut it = flat.iter().copied();
            for row in weights.iter_mut() {
                for w in row.iter_mut() {
                    *w = it.next().expect("flat head length checked by caller");
                }
            }
            for b in biases.iter_mut() {
                *b = it.next().expect("flat head length checked by caller");
            }
        }
    }
}

/// Exact Z-basis observables of the model's output state.
#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    /// `⟨Z_q⟩` per qubit.
    pub z: Vec<f64>,
    /// `⟨Z⊗…⊗Z⟩ = p_even − p_odd`.
    pub parity: f64,
}

impl Observables {
    pub fn from_state(state: &StateVector) -> Self {
        let n = state.n_qubits();
        let mut ones = vec![0.0; n];
        let mut parity = 0.0;
        for (i, a) in state.amplitudes().iter().enumerate() {
            let p = a.norm_sqr();
            for (q, acc) in ones.iter_mut().enumerate() {
                if (i >> q) & 1 == 1 {
                    *acc += p;
                }
            }
            if i.count_ones() % 2 == 0 {
                parity += p;
            } else {
                parity -= p;
            }
        }
        Self {
            z: ones.into_iter().map(|p1| 1.0 - 2.0 * p1).collect(),
            parity,
        }
    }

    pub(crate) fn as_vec(&self) -> Vec<f64> {
        let mut v = self.z.clone();
        v.push(self.parity);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadOutput {
    Parity { p_even: f64, p_odd: f64 },
    SingleZ(f64),
    Dense(Vec<f64>),
}

impl HeadOutput {
    /// Predicted class: argmax (lowest index on ties), `⟨Z⟩ ≥ 0 → 0`,
    /// `p_even ≥ ½ → 0`.
    pub fn predict(&self) -> usize {
        match self {
            HeadOutput::Parity { p_even, .. } => usize::from(*p_even < 0.5),
            HeadOutput::SingleZ(z) => usize::from(*z < 0.0),
            HeadOutput::Dense(p) => argmax(p),
        }
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    Bce,
    Sce,
}

/// Encoder + ansatz + head, with the training-set scaler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QnnModel {
    pub scaler: Option<Scaler>,
    pub encoder: EncoderKind,
    pub ansatz: AnsatzSpec,
    pub theta: Vec<f64>,
    pub head: Head,
    pub seed: u64,
}

impl QnnModel {
    /// Fresh model: `θ ~ U[0, 2π)`, dense weights `~ U[−½, ½]`, zero biases.
    pub fn new(
        ansatz: AnsatzSpec,
        head: HeadKind,
        n_classes: usize,
        seed: u64,
    ) -> Result<Self, QnnError> {
        let n_theta = build_ansatz(&ansatz)?.num_params();
        let mut rng = rng::rng(seed);
        let theta = (0..n_theta).map(|_| rng.random_range(0.0..TAU)).collect();
        let head = match head {
            HeadKind::Parity => Head::Parity,
            HeadKind::SingleZ => Head::SingleZ,
            HeadKind::Dense => {
                if n_classes < 2 {
                    return Err(QnnError::InvalidValue(
                        "dense head needs >= 2 classes".into(),
                    ));
                }
                Head::Dense {
                    weights: (0..n_classes)
                        .map(|_| {
                            (0..ansatz.n_qubits)
                                .map(|_| rng.random_range(-0.5..=0.5))
                                .collect()
                        })
                        .collect(),
                    biases: vec![0.0; n_classes],
                }
            }
        };
        let model = Self {
            scaler: None,
            encoder: EncoderKind::HadamardRz,
            ansatz,
            theta,
            head,
            seed,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), QnnError> {
        let expected = build_ansatz(&self.ansatz)?.num_params();
        if self.theta.len() != expected {
            return Err(QnnError::WidthMismatch {
                expected,
                got: self.theta.len(),
            });
        }
        if let Head::Dense { weights, biases } = &self.head {
            if weights.len() != biases.len()
                || weights.iter().any(|r| r.len() != self.ansatz.n_qubits)
            {
                return Err(QnnError::InvalidValue(format!(
                    "dense head must be {} × {}",
                    biases.len(),
                    self.ansatz.n_qubits
                )));
            }
        }
        if let Some(s) = &self.scaler {
            if s.width() != self.ansatz.n_qubits {
                return Err(QnnError::WidthMismatch {
                    expected: self.ansatz.n_qubits,
                    got: s.width(),
                });
            }
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.ansatz.n_qubits
    }

    pub fn n_classes(&self) -> usize {
        self.head.n_classes()
    }

    /// `θ` followed by the head's weights (row-major) and biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.theta.clone();
        p.extend(self.head.params());
        p
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<(), QnnError> {
        let n = self.theta.len() + self.head.num_params();
        if flat.len() != n {
            return Err(QnnError::WidthMismatch {
                expected: n,
                got: flat.len(),
            });
        }
        let (theta, head) = flat.split_at(self.theta.len());
        self.theta.copy_from_slice(theta);
        self.head.set_params(head);
        Ok(())
    }

    /// Encoder followed by the ansatz template (bindings refer to `θ`).
    pub fn circuit(&self, features: &[f64]) -> Result<Circuit, QnnError> {
        if features.len() != self.n_qubits() {
            return Err(QnnError::WidthMismatch {
                expected: self.n_qubits(),
                got: features.len(),
            });
        }
        let mut c = build_encoder(features)?;
        c.extend(&build_ansatz(&self.ansatz)?)?;
        Ok(c)
    }

    /// Exact observables for already-scaled features.
    pub fn observables(&self, features: &[f64]) -> Result<Observables, QnnError> {
        let c = self.circuit(features)?;
        let state = run_bound(&c, &self.theta, None)?;
        Ok(Observables::from_state(&state))
    }

    pub fn head_output(&self, obs: &Observables) -> HeadOutput {
        match &self.head {
            Head::Parity => HeadOutput::Parity {
                p_even: (0.5 * (1.0 + obs.parity)).clamp(0.0, 1.0),
                p_odd: (0.5 * (1.0 - obs.parity)).clamp(0.0, 1.0),
            },
            Head::SingleZ => HeadOutput::SingleZ(obs.z[0]),
            Head::Dense { weights, biases } => {
                let logits: Vec<f64> = weights
                    .iter()
                    .zip(biases)
                    .map(|(row, b)| b + row.iter().zip(&obs.z).map(|(w, z)| w * z).sum::<f64>())
                    .collect();
                HeadOutput::Dense(softmax(&logits))
            }
        }
    }

    /// Scales raw features with the fitted scaler (identity when unfitted).
    pub fn prepare(&self, raw: &[f64]) -> Result<Vec<f64>, QnnError> {
        match &self.scaler {
            Some(s) => s.transform(raw),
            None => {
                if raw.len() != self.n_qubits() {
                    return Err(QnnError::WidthMismatch {
                        expected: self.n_qubits(),
                        got: raw.len(),
                    });
                }
                Ok(raw.to_vec())
            }
        }
    }
}

/// Evaluation settings for shot-based inference on a noisy device.
#[derive(Debug, Clone, Copy)]
pub struct NoisyEval<'a> {
    pub device: &'a DeviceProfile,
    pub shots: u64,
    pub seed: u64,
}

/// Runs the model on scaled `features`. Exact expectations by default; with
/// a device the observables are estimated from noisy shots.
pub fn forward(
    model: &QnnModel,
    features: &[f64],
    noisy: Option<NoisyEval<'_>>,
) -> Result<HeadOutput, QnnError> {
    let obs = match noisy {
        None => model.observables(features)?,
        Some(ev) => {
            let c = model.circuit(features)?;
            let counts =
                run_noisy_counts_with(&c, &model.theta, ev.device, ev.shots, ev.seed, None)?;
            let n = model.n_qubits();
            let mut z = vec![0.0; n];
            let mut parity = 0.0;
            for (&outcome, &count) in &counts {
                let w = count as f64 / ev.shots as f64;
                for (q, zq) in z.iter_mut().enumerate() {
                    *zq += if (outcome >> q) & 1 == 0 { w } else { -w };
                }
                let local = outcome & ((1 << n) - 1);
                parity += if local.count_ones().is_multiple_of(2) {
                    w
                } else {
                    -w
                };
            }
            Observables { z, parity }
        }
    };
    Ok(model.head_output(&obs))
}

fn clamped_ln(p: f64) -> f64 {
    p.max(LOG_CLAMP).ln()
}

fn binary_label(label: usize) -> Result<f64, QnnError> {
    match label {
        0 => Ok(0.0),
        1 => Ok(1.0),
        _ => Err(QnnError::LabelOutOfRange {
            label,
            n_classes: 2,
        }),
    }
}

/// Loss of one prediction. `single_z` targets are +1 for class 0 and −1 for
/// class 1.
pub fn compute_loss(output: &HeadOutput, label: usize, kind: LossKind) -> Result<f64, QnnError> {
    match (output, kind) {
        (HeadOutput::Parity { p_odd, .. }, LossKind::Bce) => {
            let y = binary_label(label)?;
            Ok(-(y * clamped_ln(*p_odd) + (1.0 - y) * clamped_ln(1.0 - p_odd)))
        }
        (HeadOutput::Parity { p_odd, .. }, LossKind::Mse) => {
            Ok((p_odd - binary_label(label)?).powi(2))
        }
        (HeadOutput::SingleZ(z), LossKind::Mse) => {
            let target = 1.0 - 2.0 * binary_label(label)?;
            Ok((z - target).powi(2))
        }
        (HeadOutput::SingleZ(z), LossKind::Bce) => {
            let y = binary_label(label)?;
            let p1 = 0.5 * (1.0 - z);
            Ok(-(y * clamped_ln(p1) + (1.0 - y) * clamped_ln(1.0 - p1)))
        }
        (HeadOutput::Dense(p), LossKind::Sce) => {
            let pl = p.get(label).ok_or(QnnError::LabelOutOfRange {
                label,
                n_classes: p.len(),
            })?;
            Ok(-clamped_ln(*pl))
        }
        (HeadOutput::Dense(p), LossKind::Mse) => {
            if label >= p.len() {
                return Err(QnnError::LabelOutOfRange {
                    label,
                    n_classes: p.len(),
                });
            }
            Ok(p.iter()
                .enumerate()
                .map(|(c, pc)| (pc - f64::from(u8::from(c == label))).powi(2))
                .sum())
        }
        (out, kind) => Err(QnnError::Unsupported(format!(
            "{kind:?} loss on {:?} head",
            match out {
                HeadOutput::Parity { .. } => HeadKind::Parity,
                HeadOutput::SingleZ(_) => HeadKind::SingleZ,
                HeadOutput::Dense(_) => HeadKind::Dense,
            }
        ))),
    }
}

/// d(binary cross-entropy)/d(p1), zero where the log clamp is active.
fn bce_dp(p1: f64, y: f64) -> f64 {
    let mut d = 0.0;
    if y > 0.0 && p1 > LOG_CLAMP {
        d -= y / p1;
    }
    if y < 1.0 && 1.0 - p1 > LOG_CLAMP {
        d += (1.0 - y) / (1.0 - p1);
    }
    d
}

/// Gradients of the per-sample loss with respect to the observables and to
/// the flat head parameters.
pub(crate) fn loss_backward(
    model: &QnnModel,
    obs: &Observables,
    label: usize,
    kind: LossKind,
) -> Result<(Observables, Vec<f64>), QnnError> {
    let out = model.head_output(obs);
    // Validates the combination and the label.
    compute_loss(&out, label, kind)?;
    let n = model.n_qubits();
    let mut d_obs = Observables {
        z: vec![0.0; n],
        parity: 0.0,
    };
    let mut d_head = vec![0.0; model.head.num_params()];
    match (&model.head, out) {
        (Head::Parity, HeadOutput::Parity { p_odd, .. }) => {
            let y = label as f64;
            let d_podd = match kind {
                LossKind::Bce => bce_dp(p_odd, y),
                _ => 2.0 * (p_odd - y),
            };
            d_obs.parity = -0.5 * d_podd;
        }
        (Head::SingleZ, HeadOutput::SingleZ(z)) => {
            let y = label as f64;
            d_obs.z[0] = match kind {
                LossKind::Bce => -0.5 * bce_dp(0.5 * (1.0 - z), y),
                _ => 2.0 * (z - (1.0 - 2.0 * y)),
            };
        }
        (Head::Dense { weights, .. }, HeadOutput::Dense(p)) => {
            let d_logits: Vec<f64> = match kind {
                LossKind::Sce => {
                    if p[label] > LOG_CLAMP {
                        p.iter()
                            .enumerate()
                            .map(|(c, pc)| pc - f64::from(u8::from(c == label)))
                            .collect()
                    } else {
                        vec![0.0; p.len()]
                    }
                }
                _ => {
                    let dp: Vec<f64> = p
                        .iter()
                        .enumerate()
                        .map(|(c, pc)| 2.0 * (pc - f64::from(u8::from(c == label))))
                        .collect();
                    let dot: f64 = p.iter().zip(&dp).map(|(a, b)| a * b).sum();
                    p.iter()
                        .zip(&dp)
                        .map(|(pc, dpc)| pc * (dpc - dot))
                        .collect()
                }
            };
            let n_classes = d_logits.len();
            for (c, dl) in d_logits.iter().enumerate() {
                for q in 0..n {
                    d_obs.z[q] += dl * weights[c][q];
                    d_head[c * n + q] = dl * obs.z[q];
                }
                d_head[n_classes * n + c] = *dl;
            }
        }
        _ => unreachable!("head output always matches head kind"),
    }
    Ok((d_obs, d_head))
}
