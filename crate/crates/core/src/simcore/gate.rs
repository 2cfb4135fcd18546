use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;

/// Gate kinds understood by the simulator.
///
/// Rotations follow `R_P(θ) = exp(−iθ/2·P)` and `ZZ(θ) = exp(−iθ/2·Z⊗Z)`.
/// For controlled kinds the first target is the control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    X,
    Y,
    Z,
    H,
    RX,
    RY,
    RZ,
    CNOT,
    CZ,
    CRX,
    SWAP,
    ZZ,
    DELAY,
}

impl GateKind {
    pub const ALL: [GateKind; 13] = [
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::H,
        GateKind::RX,
        GateKind::RY,
        GateKind::RZ,
        GateKind::CNOT,
        GateKind::CZ,
        GateKind::CRX,
        GateKind::SWAP,
        GateKind::ZZ,
        GateKind::DELAY,
    ];

    pub fn arity(self) -> usize {
        match self {
            GateKind::CNOT | GateKind::CZ | GateKind::CRX | GateKind::SWAP | GateKind::ZZ => 2,
            _ => 1,
        }
    }

    /// Kinds that carry an angle (fixed or bound to a trainable parameter).
    pub fn is_rotation(self) -> bool {
        matches!(
            self,
            GateKind::RX | GateKind::RY | GateKind::RZ | GateKind::CRX | GateKind::ZZ
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::H => "H",
            GateKind::RX => "RX",
            GateKind::RY => "RY",
            GateKind::RZ => "RZ",
            GateKind::CNOT => "CNOT",
            GateKind::CZ => "CZ",
            GateKind::CRX => "CRX",
            GateKind::SWAP => "SWAP",
            GateKind::ZZ => "ZZ",
            GateKind::DELAY => "DELAY",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GateKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| SimError::UnknownGate(s.to_string()))
    }
}

/// Angle source for a rotation gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    /// Fixed angle in radians.
    Fixed(f64),
    /// Index into a trainable parameter vector.
    Bound(usize),
}

impl Param {
    pub fn resolve(self, params: &[f64]) -> Result<f64, SimError> {
        match self {
            Param::Fixed(a) => Ok(a),
            Param::Bound(k) => params
                .get(k)
                .copied()
                .ok_or(SimError::UnresolvedParameter(k)),
        }
    }
}

/// A single gate application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<Param>,
    /// Time units; carried into the noise model. Required for `DELAY`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
}

impl GateOp {
    fn fixed(kind: GateKind, targets: Vec<usize>) -> Self {
        Self {
            kind,
            targets,
            param: None,
            duration: None,
        }
    }

    fn rot(kind: GateKind, targets: Vec<usize>, param: Param) -> Self {
        Self {
            kind,
            targets,
            param: Some(param),
            duration: None,
        }
    }

    pub fn x(q: usize) -> Self {
        Self::fixed(GateKind::X, vec![q])
    }
    pub fn y(q: usize) -> Self {
        Self::fixed(GateKind::Y, vec![q])
    }
    pub fn z(q: usize) -> Self {
        Self::fixed(GateKind::Z, vec![q])
    }
    pub fn h(q: usize) -> Self {
        Self::fixed(GateKind::H, vec![q])
    }
    pub fn rx(q: usize, theta: f64) -> Self {
        Self::rot(GateKind::RX, vec![q], Param::Fixed(theta))
    }
    pub fn ry(q: usize, theta: f64) -> Self {
        Self::rot(GateKind::RY, vec![q], Param::Fixed(theta))
    }
    pub fn rz(q: usize, theta: f64) -> Self {
        Self::rot(GateKind::RZ, vec![q], Param::Fixed(theta))
    }
    pub fn cnot(control: usize, target: usize) -> Self {
        Self::fixed(GateKind::CNOT, vec![control, target])
    }
    pub fn cz(a: usize, b: usize) -> Self {
        Self::fixed(GateKind::CZ, vec![a, b])
    }
    pub fn crx(control: usize, target: usize, theta: f64) -> Self {
        Self::rot(GateKind::CRX, vec![control, target], Param::Fixed(theta))
    }
    pub fn swap(a: usize, b: usize) -> Self {
        Self::fixed(GateKind::SWAP, vec![a, b])
    }
    pub fn zz(a: usize, b: usize, theta: f64) -> Self {
        Self::rot(GateKind::ZZ, vec![a, b], Param::Fixed(theta))
    }
    pub fn delay(q: usize, duration: f64) -> Self {
        Self {
            kind: GateKind::DELAY,
            targets: vec![q],
            param: None,
            duration: Some(duration),
        }
    }

    /// A rotation of `kind` bound to trainable parameter `index`.
    pub fn bound(kind: GateKind, targets: Vec<usize>, index: usize) -> Self {
        Self::rot(kind, targets, Param::Bound(index))
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = Some(duration);
        self
    }

    /// Checks arity, target range, distinctness and parameter shape.
    pub fn validate(&self, n_qubits: usize) -> Result<(), SimError> {
        let arity = self.kind.arity();
        if self.targets.len() != arity {
            return Err(SimError::BadArity {
                kind: self.kind,
                expected: arity,
                got: self.targets.len(),
            });
        }
        for &q in &self.targets {
            if q >= n_qubits {
                return Err(SimError::QubitOutOfRange { qubit: q, n_qubits });
            }
        }
        if arity == 2 && self.targets[0] == self.targets[1] {
            return Err(SimError::DuplicateTargets(self.kind));
        }
        match (self.kind.is_rotation(), self.param) {
            (true, None) => return Err(SimError::MissingAngle(self.kind)),
            (false, Some(_)) => return Err(SimError::UnexpectedAngle(self.kind)),
            (true, Some(Param::Fixed(a))) if !a.is_finite() => {
                return Err(SimError::InvalidValue(format!("non-finite angle {a}")))
            }
            _ => {}
        }
        match self.duration {
            Some(t) if !(t.is_finite() && t >= 0.0) => {
                return Err(SimError::InvalidValue(format!("invalid duration {t}")))
            }
            None if self.kind == GateKind::DELAY => {
                return Err(SimError::InvalidValue("DELAY requires a duration".into()))
            }
            _ => {}
        }
        Ok(())
    }
}
