//! Hardware-security mechanisms for shared quantum devices: QuPUF
//! fingerprints, split compilation, dummy-gate obfuscation and buffer-qubit
//! isolation against crosstalk fault injection.

use thiserror::Error;

use crate::noise::NoiseError;
use crate::simcore::{GateKind, SimError};

mod isolation;
mod obfuscate;
mod puf;
mod split;

pub use isolation::{
    allocate_with_buffers, fault_injection_reliability, simulate_fault_injection, victim_layout,
    Allocation, Placement,
};
pub use obfuscate::{
    insert_dummy_gates, neutral_decoy_params, rank_insertion_points, restore_circuit, Candidate,
    KeyEntry, RankMode, SecurityKey, Selection, ZZ_PROBE_ANGLE,
};
pub use puf::{
    hamming_fraction, puf_circuit, qupuf_signature, PufVariant, Signature, MIN_PUF_SHOTS,
};
pub use split::{asap_layers, recombine_circuit, split_circuit, Fragment, SplitPolicy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SecurityError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("{0}")]
    Format(String),
    #[error("decoherence challenge needs a positive delay")]
    MissingDelay,
    #[error("{0} shots is below the minimum of {MIN_PUF_SHOTS}")]
    TooFewShots(u64),
    #[error("signature lengths differ: {expected} vs {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fragment count {k} outside 1..={max}")]
    BadFragmentCount { k: usize, max: usize },
    #[error("invalid fragment set: {0}")]
    FragmentSet(String),
    #[error("circuit has no gates")]
    EmptyCircuit,
    #[error("{0} cannot be used as a dummy gate")]
    UnsupportedDummy(GateKind),
    #[error("circuit needs {circuit} qubits but device has {device}")]
    WidthMismatch { circuit: usize, device: usize },
    #[error("invalid selection {0:?}")]
    InvalidSelection(Selection),
    #[error("key does not match circuit: {0}")]
    KeyMismatch(String),
    #[error("allocation infeasible: {0}")]
    Infeasible(String),
    #[error("victim and adversary qubits overlap")]
    Overlap,
}
