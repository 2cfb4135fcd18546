//! Angle-encoded variational quantum classifier.
//!
//! Features are min–max scaled onto `[0, 2π]`, loaded one per qubit by
//! `H·RZ(f)`, processed by a registered parametric ansatz and read out in the
//! Z basis through a parity, single-qubit or dense softmax head. Training uses
//! exact expectations with parameter-shift gradients.

mod encoding;
mod gradient;
mod model;
mod train;

use thiserror::Error;

pub use encoding::{
    build_ansatz, build_encoder, scale_features, AnsatzSpec, Scaler, ANSATZ_REGISTRY,
    DEFAULT_ANSATZ,
};
pub use gradient::{
    batch_loss, gradient_check, gradient_finite_difference, gradient_parameter_shift,
    observable_jacobian, relative_error, Gradient, Sample, DEFAULT_FD_STEP, GRADCHECK_CASES,
};
pub use model::{
    argmax, compute_loss, forward, softmax, EncoderKind, Head, HeadKind, HeadOutput, LossKind,
    NoisyEval, Observables, QnnModel, LOG_CLAMP,
};
pub use train::{
    evaluate_qnn, train_qnn, EpochRecord, Evaluation, History, LabeledFeatures, OptimizerKind,
    TrainConfig,
};

pub use crate::optim::{nelder_mead_minimize, optimizer_step, OptimizerState};

use crate::noise::NoiseError;
use crate::simcore::SimError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QnnError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("unknown ansatz family `{0}`")]
    UnknownAnsatz(String),
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("unsupported head/loss combination: {0}")]
    Unsupported(String),
    #[error("{0}")]
    InvalidValue(String),
}
