//! Quantum machine learning security workbench.
//!
//! * [`simcore`]: exact statevector simulation.
//! * [`noise`]: Monte Carlo trajectories over device error profiles.
//! * [`qnn`]: angle-encoded variational classifier with parameter-shift training.
//! * [`cae`]: convolutional autoencoder producing latent features.
//! * [`data`]: synthetic PCB-defect images, ingestion and splitting.
//! * [`security`]: QuPUF fingerprints, split compilation, dummy-gate
//!   obfuscation and buffer-qubit allocation.
//! * [`pipeline`]: the end-to-end image → latent → classifier experiment.

pub mod cae;
pub mod data;
pub mod noise;
pub mod optim;
pub mod pipeline;
pub mod qnn;
pub mod rng;
pub mod security;
pub mod simcore;
