use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::gate::{GateKind, GateOp, Param};
use super::{SimError, MAX_QUBITS};

/// An ordered gate list over `n_qubits` wires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<GateOp>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self, SimError> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits(n_qubits));
        }
        Ok(Self {
            n_qubits,
            ops: Vec::new(),
        })
    }

    pub fn from_ops(n_qubits: usize, ops: Vec<GateOp>) -> Result<Self, SimError> {
        let mut c = Self::new(n_qubits)?;
        for op in ops {
            c.push(op)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, op: GateOp) -> Result<&mut Self, SimError> {
        op.validate(self.n_qubits)?;
        self.ops.push(op);
        Ok(self)
    }

    pub fn insert(&mut self, position: usize, op: GateOp) -> Result<(), SimError> {
        if position > self.ops.len() {
            return Err(SimError::InvalidValue(format!(
                "insert position {position} beyond {} ops",
                self.ops.len()
            )));
        }
        op.validate(self.n_qubits)?;
        self.ops.insert(position, op);
        Ok(())
    }

    pub fn remove(&mut self, position: usize) -> Option<GateOp> {
        (position < self.ops.len()).then(|| self.ops.remove(position))
    }

    pub fn extend(&mut self, other: &Circuit) -> Result<(), SimError> {
        if other.n_qubits > self.n_qubits {
            return Err(SimError::QubitOutOfRange {
                qubit: other.n_qubits - 1,
                n_qubits: self.n_qubits,
            });
        }
        self.ops.extend(other.ops.iter().cloned());
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// One past the highest bound parameter index, 0 when nothing is bound.
    pub fn num_params(&self) -> usize {
        self.ops
            .iter()
            .filter_map(|op| match op.param {
                Some(Param::Bound(k)) => Some(k + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Replaces every parameter binding with its value from `params`.
    pub fn bind(&self, params: &[f64]) -> Result<Circuit, SimError> {
        let mut out = self.clone();
        for op in &mut out.ops {
            if let Some(p) = op.param {
                op.param = Some(Param::Fixed(p.resolve(params)?));
            }
        }
        Ok(out)
    }

    /// Same circuit on a wider register, wire `i` moved to `layout[i]`.
    pub fn remap(&self, n_qubits: usize, layout: &[usize]) -> Result<Circuit, SimError> {
        if layout.len() != self.n_qubits {
            return Err(SimError::LengthMismatch {
                expected: self.n_qubits,
                got: layout.len(),
            });
        }
        let mut out = Circuit::new(n_qubits)?;
        for op in &self.ops {
            let mut op = op.clone();
            for t in &mut op.targets {
                *t = layout[*t];
            }
            out.push(op)?;
        }
        Ok(out)
    }

    /// Serializes to the line-based text format.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    /// Parses the line-based text format.
    ///
    /// ```text
    /// qubits 2
    /// H 0
    /// CNOT 0,1      # comment
    /// RZ 1 angle=0.5 dur=20
    /// RX 0 param=3
    /// ```
    pub fn parse(text: &str) -> Result<Circuit, SimError> {
        let mut circuit: Option<Circuit> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| SimError::Parse { line: line_no, msg };
            let mut fields = line.split_whitespace();
            let head = fields.next().unwrap_or_default();
            match circuit.as_mut() {
                None => {
                    if head != "qubits" {
                        return Err(err(format!("expected `qubits N` header, found `{line}`")));
                    }
                    let n = fields
                        .next()
                        .ok_or_else(|| err("missing qubit count".into()))?
                        .parse::<usize>()
                        .map_err(|e| err(e.to_string()))?;
                    if fields.next().is_some() {
                        return Err(err("trailing tokens after qubit count".into()));
                    }
                    circuit = Some(Circuit::new(n)?);
                }
                Some(c) => {
                    let kind: GateKind = head.parse().map_err(|e: SimError| err(e.to_string()))?;
                    let targets = fields
                        .next()
                        .ok_or_else(|| err("missing targets".into()))?
                        .split(',')
                        .map(|t| {
                            t.parse::<usize>()
                                .map_err(|e| err(format!("target `{t}`: {e}")))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    let mut op = GateOp {
                        kind,
                        targets,
                        param: None,
                        duration: None,
                    };
                    for field in fields {
                        let (key, value) = field
                            .split_once('=')
                            .ok_or_else(|| err(format!("malformed field `{field}`")))?;
                        match key {
                            "angle" | "param" if op.param.is_some() => {
                                return Err(err("both angle and param given".into()))
                            }
                            "angle" => {
                                op.param = Some(Param::Fixed(
                                    value.parse().map_err(|e| err(format!("angle: {e}")))?,
                                ))
                            }
                            "param" => {
                                op.param = Some(Param::Bound(
                                    value.parse().map_err(|e| err(format!("param: {e}")))?,
                                ))
                            }
                            "dur" if op.duration.is_some() => {
                                return Err(err("duplicate dur".into()))
                            }
                            "dur" => {
                                op.duration =
                                    Some(value.parse().map_err(|e| err(format!("dur: {e}")))?)
                            }
                            _ => return Err(err(format!("unknown field `{key}`"))),
                        }
                    }
                    c.push(op).map_err(|e| err(e.to_string()))?;
                }
            }
        }
        circuit.ok_or(SimError::Parse {
            line: 0,
            msg: "empty circuit text".into(),
        })
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qubits {}", self.n_qubits)?;
        for op in &self.ops {
            write!(f, "{} ", op.kind)?;
            for (i, t) in op.targets.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{t}")?;
            }
            match op.param {
                Some(Param::Fixed(a)) => write!(f, " angle={a:?}")?,
                Some(Param::Bound(k)) => write!(f, " param={k}")?,
                None => {}
            }
            if let Some(t) = op.duration {
                write!(f, " dur={t:?}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for Circuit {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Circuit::parse(s)
    }
}
