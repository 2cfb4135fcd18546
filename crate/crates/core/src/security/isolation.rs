use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::SecurityError;
use crate::noise::{run_noisy_counts_with, ConcurrentSchedule, DeviceProfile};
use crate::simcore::{extract_bits, probabilities, run_circuit, Circuit};

/// Qubit sets of co-tenant programs plus the idle buffer around them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    /// `programs[i]` in the order qubits were claimed (BFS order).
    pub programs: Vec<Vec<usize>>,
    pub buffer: Vec<usize>,
}

fn adjacency(n_qubits: usize, edges: &[(usize, usize)]) -> Result<Vec<Vec<usize>>, SecurityError> {
    let mut adj = vec![Vec::new(); n_qubits];
    for &(a, b) in edges {
        if a >= n_qubits || b >= n_qubits || a == b {
            return Err(SecurityError::Format(format!("invalid edge ({a}, {b})")));
        }
        adj[a].push(b);
        adj[b].push(a);
    }
    for v in &mut adj {
        v.sort_unstable();
        v.dedup();
    }
    Ok(adj)
}

/// First `size` qubits reached by BFS from `start` through allowed qubits.
fn grow(adj: &[Vec<usize>], start: usize, size: usize, forbidden: &[bool]) -> Option<Vec<usize>> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut out = Vec::with_capacity(size);
    while let Some(q) = queue.pop_front() {
        out.push(q);
        if out.len() == size {
            return Some(out);
        }
        for &r in &adj[q] {
            if !seen[r] && !forbidden[r] {
                seen[r] = true;
                queue.push_back(r);
            }
        }
    }
    None
}

/// Lowest-start connected placement avoiding `forbidden`, optionally
/// restricted to start qubits satisfying `start_ok`.
fn place(
    adj: &[Vec<usize>],
    size: usize,
    forbidden: &[bool],
    start_ok: impl Fn(usize) -> bool,
) -> Option<Vec<usize>> {
    (0..adj.len())
        .filter(|&q| !forbidden[q] && start_ok(q))
        .find_map(|q| grow(adj, q, size, forbidden))
}

fn neighbourhood(adj: &[Vec<usize>], set: &[usize]) -> Vec<bool> {
    let mut mark = vec![false; adj.len()];
    for &q in set {
        mark[q] = true;
        adj[q].iter().for_each(|&r| mark[r] = true);
    }
    mark
}

/// Places programs largest first (ties by input order). Each program gets a
/// connected qubit set not touching or neighbouring any earlier program.
pub fn allocate_with_buffers(
    n_qubits: usize,
    coupling_map: &[(usize, usize)],
    program_sizes: &[usize],
) -> Result<Allocation, SecurityError> {
    let adj = adjacency(n_qubits, coupling_map)?;
    if program_sizes.contains(&0) {
        return Err(SecurityError::Infeasible("program of size 0".into()));
    }
    let mut order: Vec<usize> = (0..program_sizes.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(program_sizes[i]));
    let mut programs = vec![Vec::new(); program_sizes.len()];
    let mut forbidden = vec![false; n_qubits];
    for i in order {
        let qubits = place(&adj, program_sizes[i], &forbidden, |_| true).ok_or_else(|| {
            SecurityError::Infeasible(format!(
                "no connected {}-qubit region for program {i} outside earlier programs and their neighbours",
                program_sizes[i]
            ))
        })?;
        for (f, n) in forbidden.iter_mut().zip(neighbourhood(&adj, &qubits)) {
            *f |= n;
        }
        programs[i] = qubits;
    }
    let assigned: BTreeSet<usize> = programs.iter().flatten().copied().collect();
    let buffer = (0..n_qubits)
        .filter(|q| !assigned.contains(q) && adj[*q].iter().any(|r| assigned.contains(r)))
        .collect();
    Ok(Allocation { programs, buffer })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Victim starts next to the adversary.
    Adjacent,
    /// Victim keeps a buffer qubit between itself and the adversary.
    Buffered,
}

/// Physical qubits for a `width`-qubit victim relative to the adversary.
pub fn victim_layout(
    device: &DeviceProfile,
    adversary: &[usize],
    width: usize,
    placement: Placement,
) -> Result<Vec<usize>, SecurityError> {
    let adj = adjacency(device.n_qubits, &device.coupling_map)?;
    if let Some(&q) = adversary.iter().find(|&&q| q >= device.n_qubits) {
        return Err(SecurityError::Infeasible(format!(
            "adversary qubit {q} not on device"
        )));
    }
    let halo = neighbourhood(&adj, adversary);
    let layout = match placement {
        Placement::Adjacent => {
            let mut forbidden = vec![false; device.n_qubits];
            adversary.iter().for_each(|&q| forbidden[q] = true);
            place(&adj, width, &forbidden, |q| halo[q])
        }
        Placement::Buffered => place(&adj, width, &halo, |_| true),
    };
    layout.ok_or_else(|| {
        SecurityError::Infeasible(format!(
            "no {placement:?} placement for a {width}-qubit victim"
        ))
    })
}

/// Fraction of noisy shots landing in the victim's most likely ideal outcomes
/// while the adversary drives its qubits during every victim gate.
pub fn fault_injection_reliability(
    victim: &Circuit,
    layout: &[usize],
    adversary: &[usize],
    device: &DeviceProfile,
    shots: u64,
    seed: u64,
) -> Result<f64, SecurityError> {
    if layout.iter().any(|q| adversary.contains(q)) {
        return Err(SecurityError::Overlap);
    }
    let ideal = probabilities(&run_circuit(victim, None)?);
    let best = ideal.probs().iter().copied().fold(0.0, f64::max);
    let target: Vec<bool> = ideal.probs().iter().map(|&p| p >= best - 1e-9).collect();
    let physical = victim.remap(device.n_qubits, layout)?;
    let drive = ConcurrentSchedule::Constant(adversary.to_vec());
    let counts = run_noisy_counts_with(&physical, &[], device, shots, seed, Some(&drive))?;
    let hits: u64 = counts
        .iter()
        .filter(|(&outcome, _)| target[extract_bits(outcome, layout)])
        .map(|(_, &c)| c)
        .sum();
    Ok(hits as f64 / shots as f64)
}

/// Places the victim per `placement` and measures its reliability under
/// crosstalk injection from `adversary`.
pub fn simulate_fault_injection(
    victim: &Circuit,
    adversary: &[usize],
    device: &DeviceProfile,
    placement: Placement,
    shots: u64,
    seed: u64,
) -> Result<f64, SecurityError> {
    let layout = victim_layout(device, adversary, victim.n_qubits(), placement)?;
    fault_injection_reliability(victim, &layout, adversary, device, shots, seed)
}
