//! Gradient-based steppers, Nelder–Mead and central differences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("length mismatch: {params} parameters, {grad} gradient entries")]
    LengthMismatch { params: usize, grad: usize },
    #[error("objective is not finite at {0:?}")]
    NonFinite(Vec<f64>),
    #[error("step size must be positive, got {0}")]
    BadStep(f64),
}

pub const ADAGRAD_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter optimizer memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OptimizerState {
    Adagrad {
        lr: f64,
        accum: Vec<f64>,
    },
    Adam {
        lr: f64,
        config: AdamConfig,
        m: Vec<f64>,
        v: Vec<f64>,
        t: u64,
    },
}

impl OptimizerState {
    pub fn adagrad(lr: f64, n: usize) -> Self {
        OptimizerState::Adagrad {
            lr,
            accum: vec![0.0; n],
        }
    }

    pub fn adam(lr: f64, n: usize) -> Self {
        OptimizerState::Adam {
            lr,
            config: AdamConfig::default(),
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn len(&self) -> usize {
        match self {
            OptimizerState::Adagrad { accum, .. } => accum.len(),
            OptimizerState::Adam { m, .. } => m.len(),
        }
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<(), OptimError> {
        if params.len() != grad.len() || params.len() != self.len() {
            return Err(OptimError::LengthMismatch {
                params: params.len(),
                grad: grad.len(),
            });
        }
        match self {
            OptimizerState::Adagrad { lr, accum } => {
                for ((p, g), a) in params.iter_mut().zip(grad).zip(accum.iter_mut()) {
                    *a += g * g;
                    *p -= *lr * g / (a.sqrt() + ADAGRAD_EPS);
                }
            }
            OptimizerState::Adam {
                lr,
                config,
                m,
                v,
                t,
            } => {
                *t += 1;
                let bc1 = 1.0 - config.beta1.powi(*t as i32);
                let bc2 = 1.0 - config.beta2.powi(*t as i32);
                for i in 0..params.len() {
                    let g = grad[i];
                    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
                    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    params[i] -= *lr * m_hat / (v_hat.sqrt() + config.eps);
                }
            }
        }
        Ok(())
    }
}

/// Functional form of [`OptimizerState::step`].
pub fn optimizer_step(
    state: &OptimizerState,
    params: &[f64],
    grad: &[f64],
) -> Result<(Vec<f64>, OptimizerState), OptimError> {
    let mut next = state.clone();
    let mut out = params.to_vec();
    next.step(&mut out, grad)?;
    Ok((out, next))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadConfig {
    pub max_iter: usize,
    /// Stop once `max_i f(x_i) − min_i f(x_i)` drops below this
    pub tol: f64,
    /// ... and the largest vertex distance from the best vertex drops below this.
    pub xtol: f64,
    /// Offset of the initial simplex vertices along each axis.
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            tol: 1e-12,
            xtol: 1e-8,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
}

const NM_REFLECT: f64 = 1.0;
const NM_EXPAND: f64 = 2.0;
const NM_CONTRACT: f64 = 0.5;
const NM_SHRINK: f64 = 0.5;

/// Downhill simplex minimization with the textbook coefficients
/// (reflection 1, expansion 2, contraction ½, shrink ½).
pub fn nelder_mead_minimize<F>(
    mut objective: F,
    initial: &[f64],
    config: &NelderMeadConfig,
) -> Result<NelderMeadResult, OptimError>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = initial.len();
    let mut eval = |x: &[f64]| -> Result<f64, OptimError> {
        let f = objective(x);
        if f.is_finite() {
            Ok(f)
        } else {
            Err(OptimError::NonFinite(x.to_vec()))
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((initial.to_vec(), eval(initial)?));
    for i in 0..n {
        let mut x = initial.to_vec();
        x[i] += config.initial_step;
        let f = eval(&x)?;
        simplex.push((x, f));
    }

    let mut iterations = 0;
    while iterations < config.max_iter {
        // Stable sort keeps the earliest vertex first among ties.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread < config.tol && size < config.xtol {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |coef: f64, worst: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(worst)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };
        let worst = simplex[n].0.clone();
        let (f_best, f_second_worst, f_worst) = (simplex[0].1, simplex[n - 1].1, simplex[n].1);

        let xr = along(NM_REFLECT, &worst);
        let fr = eval(&xr)?;
        if fr < f_best {
            let xe = along(NM_EXPAND, &worst);
            let fe = eval(&xe)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second_worst {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < f_worst {
            let xc = along(NM_REFLECT * NM_CONTRACT, &worst);
            let fc = eval(&xc)?;
            (xc, fc)
        } else {
            let xc = along(-NM_CONTRACT, &worst);
            let fc = eval(&xc)?;
            (xc, fc)
        };
        if fc < fr.min(f_worst) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + NM_SHRINK * (v - b))
                .collect();
            let f = eval(&x)?;
            *vertex = (x, f);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Ok(NelderMeadResult { x, f, iterations })
}

/// Central difference `(f(x+h) − f(x−h)) / 2h` of a scalar function.
pub fn central_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> Result<f64, OptimError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(OptimError::BadStep(h));
    }
    Ok((f(x + h) - f(x - h)) / (2.0 * h))
}

/// Central-difference gradient of a multivariate function.
pub fn central_gradient<F: Fn(&[f64]) -> f64>(
    f: F,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>, OptimError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(OptimError::BadStep(h));
    }
    let mut probe = x.to_vec();
    Ok((0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect())
}
