//! Exact statevector simulation.
//!
//! Qubit 0 is the least significant bit of a basis index throughout the crate.

mod circuit;
mod gate;
mod state;

use thiserror::Error;

pub use circuit::Circuit;
pub use gate::{GateKind, GateOp, Param};
pub(crate) use state::sample_index;
pub use state::{
    expectation_z, expectation_z_all, extract_bits, fixed_matrix, parity_probabilities,
    probabilities, run_bound, run_circuit, rx_matrix, ry_matrix, rz_matrix, sample_counts,
    total_variation_distance, Counts, Distribution, Matrix2, StateVector,
};

/// Dense simulation is capped at this register width.
pub const MAX_QUBITS: usize = 16;

/// Allowed deviation of `Σ|a_i|²` (or `Σ p_i`) from 1.
pub const NORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("register width {0} outside 1..={max}", max = MAX_QUBITS)]
    TooManyQubits(usize),
    #[error("qubit {qubit} out of range for {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("{kind} takes {expected} target(s), got {got}")]
    BadArity {
        kind: GateKind,
        expected: usize,
        got: usize,
    },
    #[error("{0} targets must be distinct")]
    DuplicateTargets(GateKind),
    #[error("{0} requires an angle or parameter binding")]
    MissingAngle(GateKind),
    #[error("{0} does not take an angle")]
    UnexpectedAngle(GateKind),
    #[error("parameter {0} is unbound")]
    UnresolvedParameter(usize),
    #[error("unknown gate kind `{0}`")]
    UnknownGate(String),
    #[error("shots must be at least 1")]
    ZeroShots,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("qubit set must be non-empty")]
    EmptyQubitSet,
    #[error("not normalized (total {0})")]
    NotNormalized(f64),
    #[error("{0}")]
    InvalidValue(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
