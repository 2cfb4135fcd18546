use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::SecurityError;
use crate::rng::rng;
use crate::simcore::Circuit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    /// Near-equal op counts, larger fragments first.
    ByGateCount,
    /// Contiguous bands of ASAP layers.
    ByLayer,
}

/// One contiguous piece of a split circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub index: usize,
    pub total: usize,
    pub circuit: Circuit,
}

impl Fragment {
    /// Header line `fragment i of k` followed by the circuit text.
    pub fn to_text(&self) -> String {
        format!(
            "fragment {} of {}\n{}",
            self.index,
            self.total,
            self.circuit.to_text()
        )
    }

    pub fn from_text(text: &str) -> Result<Self, SecurityError> {
        let (header, body) = text.split_once('\n').unwrap_or((text, ""));
        let bad = || SecurityError::Format(format!("expected `fragment i of k`, got `{header}`"));
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 4 || f[0] != "fragment" || f[2] != "of" {
            return Err(bad());
        }
        let index: usize = f[1].parse().map_err(|_| bad())?;
        let total: usize = f[3].parse().map_err(|_| bad())?;
        if index >= total {
            return Err(bad());
        }
        Ok(Self {
            index,
            total,
            circuit: Circuit::parse(body)?,
        })
    }
}

/// ASAP layer (1-based) of every op.
pub fn asap_layers(circuit: &Circuit) -> Vec<usize> {
    let mut last = vec![0usize; circuit.n_qubits()];
    circuit
        .ops()
        .iter()
        .map(|op| {
            let layer = 1 + op.targets.iter().map(|&q| last[q]).max().unwrap_or(0);
            op.targets.iter().for_each(|&q| last[q] = layer);
            layer
        })
        .collect()
}

fn fragment_of_each_op(
    circuit: &Circuit,
    k: usize,
    policy: SplitPolicy,
) -> Result<Vec<usize>, SecurityError> {
    let n = circuit.len();
    if k == 0 || k > n {
        return Err(SecurityError::BadFragmentCount { k, max: n });
    }
    Ok(match policy {
        SplitPolicy::ByGateCount => {
            let (base, extra) = (n / k, n % k);
            (0..k)
                .flat_map(|f| std::iter::repeat_n(f, base + usize::from(f < extra)))
                .collect()
        }
        SplitPolicy::ByLayer => {
            let layers = asap_layers(circuit);
            let depth = layers.iter().copied().max().unwrap_or(0);
            if k > depth {
                return Err(SecurityError::BadFragmentCount { k, max: depth });
            }
            // The running maximum layer rises by at most one per op, so every
            // band receives at least one op.
            let mut running = 0;
            layers
                .iter()
                .map(|&l| {
                    running = running.max(l);
                    (running - 1) * k / depth
                })
                .collect()
        }
    })
}

/// Splits into `k` contiguous fragments. With `shuffle_seed` the fragments
/// are returned in a seeded random order; indices always refer to the
/// original order.
pub fn split_circuit(
    circuit: &Circuit,
    k: usize,
    policy: SplitPolicy,
    shuffle_seed: Option<u64>,
) -> Result<Vec<Fragment>, SecurityError> {
    let owner = fragment_of_each_op(circuit, k, policy)?;
    let mut fragments: Vec<Fragment> = (0..k)
        .map(|index| Fragment {
            index,
            total: k,
            circuit: Circuit::new(circuit.n_qubits()).expect("width already valid"),
        })
        .collect();
    for (op, &f) in circuit.ops().iter().zip(&owner) {
        fragments[f].circuit.push(op.clone())?;
    }
    if let Some(seed) = shuffle_seed {
        fragments.shuffle(&mut rng(seed));
    }
    Ok(fragments)
}

/// Concatenates fragments in index order, whatever order they arrive in.
pub fn recombine_circuit(fragments: &[Fragment]) -> Result<Circuit, SecurityError> {
    let first = fragments
        .first()
        .ok_or(SecurityError::FragmentSet("no fragments".into()))?;
    let (k, n) = (first.total, first.circuit.n_qubits());
    if fragments.len() != k {
        return Err(SecurityError::FragmentSet(format!(
            "{} fragments for a split into {k}",
            fragments.len()
        )));
    }
    let mut slots: Vec<Option<&Fragment>> = vec![None; k];
    for f in fragments {
        if f.total != k {
            return Err(SecurityError::FragmentSet(format!(
                "fragment {} claims {} parts, expected {k}",
                f.index, f.total
            )));
        }
        if f.circuit.n_qubits() != n {
            return Err(SecurityError::FragmentSet(format!(
                "fragment {} has {} qubits, expected {n}",
                f.index,
                f.circuit.n_qubits()
            )));
        }
        let slot = slots
            .get_mut(f.index)
            .ok_or_else(|| SecurityError::FragmentSet(format!("index {} out of range", f.index)))?;
        if slot.is_some() {
            return Err(SecurityError::FragmentSet(format!(
                "duplicate index {}",
                f.index
            )));
        }
        *slot = Some(f);
    }
    let mut out = Circuit::new(n)?;
    for f in slots.into_iter().flatten() {
        out.extend(&f.circuit)?;
    }
    Ok(out)
}
