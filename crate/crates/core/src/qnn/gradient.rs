use std::f64::consts::{FRAC_PI_2, SQRT_2, TAU};

use rand::Rng;
use rayon::prelude::*;

use super::encoding::AnsatzSpec;
use super::model::{compute_loss, loss_backward, HeadKind, LossKind, Observables, QnnModel};
use super::QnnError;
use crate::optim::central_gradient;
use crate::rng::{derive_seed, rng_for};
use crate::simcore::{GateKind, Param, StateVector};

/// One labelled, already-scaled sample.
pub type Sample<'a> = (&'a [f64], usize);

/// Gradient over `θ` and the flat head parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub theta: Vec<f64>,
    pub head: Vec<f64>,
}

impl Gradient {
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.theta.clone();
        v.extend_from_slice(&self.head);
        v
    }
}

/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`, or 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Shift terms `(coefficient, shift)` giving `d f / dθ = Σ c·f(θ + s)`.
///
/// Single-qubit rotations and `ZZ` have generator eigenvalues `±½`, so the
/// two-point rule at `±π/2` is exact. `CRX` has eigenvalues `{0, ±½}` and
/// needs the four-point rule at `±π/2`, `±3π/2`.
fn shift_rule(kind: GateKind) -> &'static [(f64, f64)] {
    const TWO_POINT: [(f64, f64); 2] = [(0.5, FRAC_PI_2), (-0.5, -FRAC_PI_2)];
    const D_PLUS: f64 = (SQRT_2 + 1.0) / (4.0 * SQRT_2);
    const D_MINUS: f64 = (SQRT_2 - 1.0) / (4.0 * SQRT_2);
    const FOUR_POINT: [(f64, f64); 4] = [
        (D_PLUS, FRAC_PI_2),
        (-D_PLUS, -FRAC_PI_2),
        (-D_MINUS, 3.0 * FRAC_PI_2),
        (D_MINUS, -3.0 * FRAC_PI_2),
    ];
    match kind {
        GateKind::CRX => &FOUR_POINT,
        _ => &TWO_POINT,
    }
}

/// Exact observables and their derivatives with respect to each `θ_k` for
/// one sample, by the parameter-shift rule.
///
/// The state before each parametric gate is reused across that gate's shifted
/// evaluations.
pub fn observable_jacobian(
    model: &QnnModel,
    features: &[f64],
) -> Result<(Observables, Vec<Vec<f64>>), QnnError> {
    let circuit = model.circuit(features)?;
    let theta = &model.theta;
    let width = model.n_qubits() + 1;
    let mut jac = vec![vec![0.0; width]; theta.len()];
    let mut prefix = StateVector::zero(circuit.n_qubits())?;
    let ops = circuit.ops();
    for (j, op) in ops.iter().enumerate() {
        let angle = match op.param {
            Some(p) => p.resolve(theta)?,
            None => 0.0,
        };
        if let Some(Param::Bound(k)) = op.param {
            for &(coef, shift) in shift_rule(op.kind) {
                let mut s = prefix.clone();
                s.apply_kind(op.kind, &op.targets, angle + shift);
                for rest in &ops[j + 1..] {
                    let a = match rest.param {
                        Some(p) => p.resolve(theta)?,
                        None => 0.0,
                    };
                    s.apply_kind(rest.kind, &rest.targets, a);
                }
                let obs = Observables::from_state(&s).as_vec();
                for (d, o) in jac[k].iter_mut().zip(obs) {
                    *d += coef * o;
                }
            }
        }
        prefix.apply_kind(op.kind, &op.targets, angle);
    }
    Ok((Observables::from_state(&prefix), jac))
}

fn sample_gradient(
    model: &QnnModel,
    features: &[f64],
    label: usize,
    loss: LossKind,
) -> Result<(f64, Vec<f64>), QnnError> {
    let (obs, jac) = observable_jacobian(model, features)?;
    let value = compute_loss(&model.head_output(&obs), label, loss)?;
    let (d_obs, d_head) = loss_backward(model, &obs, label, loss)?;
    let d_obs = d_obs.as_vec();
    let mut g: Vec<f64> = jac
        .iter()
        .map(|col| col.iter().zip(&d_obs).map(|(a, b)| a * b).sum())
        .collect();
    g.extend(d_head);
    Ok((value, g))
}

/// Mean loss and parameter-shift gradient over `batch`.
///
/// Samples are evaluated in parallel and reduced in batch order, so the
/// result does not depend on thread scheduling.
pub fn gradient_parameter_shift(
    model: &QnnModel,
    batch: &[Sample<'_>],
    loss: LossKind,
) -> Result<(f64, Gradient), QnnError> {
    if batch.is_empty() {
        return Err(QnnError::EmptyDataset);
    }
    let per_sample = batch
        .par_iter()
        .map(|(x, y)| sample_gradient(model, x, *y, loss))
        .collect::<Result<Vec<_>, _>>()?;
    let n = batch.len() as f64;
    let mut total = 0.0;
    let mut acc = vec![0.0; model.theta.len() + model.head.num_params()];
    for (l, g) in per_sample {
        total += l;
        for (a, gi) in acc.iter_mut().zip(g) {
            *a += gi;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    let head = acc.split_off(model.theta.len());
    Ok((total / n, Gradient { theta: acc, head }))
}

/// Mean loss of `batch` under exact expectations.
pub fn batch_loss(model: &QnnModel, batch: &[Sample<'_>], loss: LossKind) -> Result<f64, QnnError> {
    if batch.is_empty() {
        return Err(QnnError::EmptyDataset);
    }
    let losses = batch
        .par_iter()
        .map(|(x, y)| {
            let obs = model.observables(x)?;
            compute_loss(&model.head_output(&obs), *y, loss)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(losses.iter().sum::<f64>() / batch.len() as f64)
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central finite differences of the mean batch loss over every parameter.
pub fn gradient_finite_difference(
    model: &QnnModel,
    batch: &[Sample<'_>],
    loss: LossKind,
    h: f64,
) -> Result<Gradient, QnnError> {
    if h == 0.0 || !h.is_finite() || h < 0.0 {
        return Err(QnnError::InvalidValue(format!(
            "finite-difference step {h}"
        )));
    }
    // Surface combination/label errors before differencing.
    batch_loss(model, batch, loss)?;
    let base = model.params();
    let mut flat = central_gradient(
        |p| {
            let mut m = model.clone();
            m.set_params(p).expect("same length as model params");
            batch_loss(&m, batch, loss).unwrap_or(f64::NAN)
        },
        &base,
        h,
    )
    .map_err(|e| QnnError::InvalidValue(e.to_string()))?;
    let head = flat.split_off(model.theta.len());
    Ok(Gradient { theta: flat, head })
}

/// Head and loss pairings exercised by [`gradient_check`].
pub const GRADCHECK_CASES: [(HeadKind, LossKind, usize); 3] = [
    (HeadKind::Parity, LossKind::Bce, 2),
    (HeadKind::SingleZ, LossKind::Mse, 2),
    (HeadKind::Dense, LossKind::Sce, 3),
];

/// Worst parameter-shift vs finite-difference relative error over
/// `n_models` seeded random `crx-ring` models, cycling through
/// [`GRADCHECK_CASES`]. Each model is checked on 4 random samples.
pub fn gradient_check(
    seed: u64,
    n_models: usize,
    n_qubits: usize,
    layers: usize,
) -> Result<f64, QnnError> {
    let mut worst: f64 = 0.0;
    for k in 0..n_models {
        let (head, loss, classes) = GRADCHECK_CASES[k % GRADCHECK_CASES.len()];
        let model_seed = derive_seed(seed, k as u64);
        let model = QnnModel::new(
            AnsatzSpec::crx_ring(n_qubits, layers),
            head,
            classes,
            model_seed,
        )?;
        let mut rng = rng_for(model_seed, 1);
        let xs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..n_qubits).map(|_| rng.random_range(0.0..TAU)).collect())
            .collect();
        let batch: Vec<Sample> = xs
            .iter()
            .map(|x| (x.as_slice(), rng.random_range(0..classes)))
            .collect();
        let (_, ps) = gradient_parameter_shift(&model, &batch, loss)?;
        let fd = gradient_finite_difference(&model, &batch, loss, DEFAULT_FD_STEP)?;
        worst = worst.max(relative_error(&ps.flat(), &fd.flat()));
    }
    Ok(worst)
}
