mod common;

use common::{oracle_probs, oracle_tvd, random_circuit};
use proptest::prelude::*;
use qmlsec_core::rng::rng;
use qmlsec_core::security::{
    allocate_with_buffers, insert_dummy_gates, neutral_decoy_params, recombine_circuit,
    restore_circuit, split_circuit, Selection, SplitPolicy,
};
use qmlsec_core::simcore::GateKind;
use rand::Rng;

fn random_graph(seed: u64, n: usize) -> Vec<(usize, usize)> {
    let mut r = rng(seed);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|q| (r.random_range(0..q), q)).collect();
    for _ in 0..n / 2 {
        let (a, b) = (r.random_range(0..n), r.random_range(0..n));
        if a != b {
            edges.push((a.min(b), a.max(b)));
        }
    }
    edges
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn allocations_are_legal(
        seed in any::<u64>(),
        n in 2usize..=14,
        sizes in prop::collection::vec(1usize..=4, 1..4),
    ) {
        let edges = random_graph(seed, n);
        let Ok(alloc) = allocate_with_buffers(n, &edges, &sizes) else {
            return Ok(());
        };
        let mut owner = vec![None; n];
        for (i, p) in alloc.programs.iter().enumerate() {
            prop_assert_eq!(p.len(), sizes[i]);
            for &q in p {
                prop_assert!(owner[q].is_none(), "qubit {} assigned twice", q);
                owner[q] = Some(i);
            }
        }
        for &(a, b) in &edges {
            if let (Some(x), Some(y)) = (owner[a], owner[b]) {
                prop_assert_eq!(x, y, "edge ({}, {}) joins two programs", a, b);
            }
        }
        let mut expected: Vec<usize> = (0..n)
            .filter(|&q| owner[q].is_none())
            .filter(|&q| edges.iter().any(|&(a, b)| {
                (a == q && owner[b].is_some()) || (b == q && owner[a].is_some())
            }))
            .collect();
        expected.sort_unstable();
        let mut buffer = alloc.buffer.clone();
        buffer.sort_unstable();
        prop_assert_eq!(buffer, expected);
    }

    #[test]
    fn split_recombine_is_identity(
        seed in any::<u64>(),
        len in 1usize..=25,
        k in 1usize..=25,
        by_layer in any::<bool>(),
    ) {
        let c = random_circuit(&mut rng(seed), 3, len);
        let k = k.min(len);
        let policy = if by_layer { SplitPolicy::ByLayer } else { SplitPolicy::ByGateCount };
        let Ok(frags) = split_circuit(&c, k, policy, Some(seed)) else {
            prop_assert!(by_layer, "gate-count split of {} gates into {} failed", len, k);
            return Ok(());
        };
        prop_assert_eq!(frags.len(), k);
        prop_assert_eq!(recombine_circuit(&frags).unwrap(), c);
    }

    #[test]
    fn zz_decoys_are_neutral_at_zero(seed in any::<u64>(), len in 1usize..=12, count in 1usize..=4) {
        let c = random_circuit(&mut rng(seed), 3, len);
        let mut r = rng(seed ^ 0xdec0);
        let mut selections: Vec<Selection> = (0..count)
            .map(|_| {
                let a = r.random_range(0..3);
                Selection {
                    position: r.random_range(0..=len),
                    kind: GateKind::ZZ,
                    edge: (a, (a + 1 + r.random_range(0..2)) % 3),
                }
            })
            .collect();
        selections.sort_by_key(|s| s.position);
        let (obf, key) = insert_dummy_gates(&c, &selections).unwrap();
        prop_assert_eq!(obf.len(), len + count);
        let restored = restore_circuit(&obf, &key).unwrap();
        prop_assert_eq!(&restored, &c);
        let neutral = oracle_probs(&obf, &neutral_decoy_params(&[], &key));
        prop_assert!(oracle_tvd(&neutral, &oracle_probs(&restored, &[])) < 1e-12);
    }

    #[test]
    fn swap_dummies_restore_exactly(seed in any::<u64>(), len in 1usize..=12) {
        let c = random_circuit(&mut rng(seed), 4, len);
        let mut r = rng(seed ^ 0x5a);
        let a = r.random_range(0..3);
        let s = Selection { position: r.random_range(0..=len), kind: GateKind::SWAP, edge: (a, a + 1) };
        let (obf, key) = insert_dummy_gates(&c, &[s]).unwrap();
        let restored = restore_circuit(&obf, &key).unwrap();
        prop_assert!(oracle_tvd(&oracle_probs(&restored, &[]), &oracle_probs(&c, &[])) < 1e-12);
    }
}

#[test]
fn roomy_line_fits_three_programs() {
    let edges: Vec<(usize, usize)> = (1..14).map(|q| (q - 1, q)).collect();
    let alloc = allocate_with_buffers(14, &edges, &[2, 4, 3]).unwrap();
    assert_eq!(
        alloc.programs,
        vec![vec![9, 10], vec![0, 1, 2, 3], vec![5, 6, 7]]
    );
    assert_eq!(alloc.buffer, vec![4, 8, 11]);
}
