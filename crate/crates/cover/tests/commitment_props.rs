//! Property tests over the commitment structures: plain Merkle proofs,
//! coded-tree symbol proofs, and subtree sampling marginals.

use cover::cmt::{build_tree, sample_subtree, CmtContext, CmtParams, SymbolId};
use cover::merkle::build_merkle_tree;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn merkle_round_trip_all_leaves(
        leaves in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..40), 1..24)
    ) {
        let (root, tree) = build_merkle_tree(&leaves).unwrap();
        for (i, leaf) in leaves.iter().enumerate() {
            let proof = tree.prove(i).unwrap();
            prop_assert!(proof.verify_against(&root, leaf));
        }
    }

    #[test]
    fn merkle_single_bit_mutations_fail(
        leaves in prop::collection::vec(prop::collection::vec(any::<u8>(), 1..24), 2..12),
        leaf_bit in any::<u16>(),
        path_pick in any::<u16>(),
    ) {
        let (root, tree) = build_merkle_tree(&leaves).unwrap();
        let i = leaf_bit as usize % leaves.len();
        let proof = tree.prove(i).unwrap();

        // Mutate one bit of the leaf bytes.
        let mut mutated = leaves[i].clone();
        let bit = leaf_bit as usize % (mutated.len() * 8);
        mutated[bit / 8] ^= 1 << (bit % 8);
        prop_assert!(!proof.verify_against(&root, &mutated));

        // Mutate one bit of a path digest.
        let mut broken = proof.clone();
        let entry = path_pick as usize % broken.path.len().max(1);
        if !broken.path.is_empty() {
            broken.path[entry].0 .0[(path_pick % 32) as usize] ^= 1;
            prop_assert!(!broken.verify_against(&root, &leaves[i]));
        }
    }

    #[test]
    fn merkle_proof_survives_wire(
        leaves in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..16), 1..16),
        pick in any::<u16>(),
    ) {
        let (_, tree) = build_merkle_tree(&leaves).unwrap();
        let i = pick as usize % leaves.len();
        let proof = tree.prove(i).unwrap();
        let decoded = cover::merkle::MerkleProof::from_bytes(&proof.to_bytes()).unwrap();
        prop_assert_eq!(decoded, proof);
    }

    #[test]
    fn symbol_proofs_reject_cross_position_replay(
        seed in any::<u64>(),
    ) {
        let ctx = CmtContext::new(
            CmtParams { symbol_size: 32, code_seed: seed, ..CmtParams::default() },
            16,
        ).unwrap();
        let base: Vec<Vec<u8>> = (0u8..16).map(|i| vec![i.wrapping_add(seed as u8); 32]).collect();
        let tree = build_tree(&ctx, &base).unwrap();
        let bottom = tree.depth();
        let a = SymbolId::new(bottom, 3);
        let b = SymbolId::new(bottom, 7);
        let proof_a = tree.symbol_proof(&ctx.layout, a);
        prop_assert!(!proof_a.verify(&tree.root(), &ctx.layout, tree.symbol(b)));
    }
}

/// Marginal uniformity of the interleaved sampler: over many seeds, each
/// symbol of each layer is included with the same frequency, within 3 sigma
/// of the per-layer binomial expectation.
#[test]
fn subtree_sampling_marginals_are_uniform() {
    let layout = cover::cmt::Layout::for_base(16, 4);
    let trials = 10_000usize;
    let c = 4usize;
    let depth = layout.depth();
    let mut counts: Vec<Vec<u32>> = (1..=depth)
        .map(|l| vec![0u32; layout.total_width(l)])
        .collect();
    for seed in 0..trials as u64 {
        let sub = sample_subtree(&layout, c, 0x5EED_0000 + seed);
        for id in sub.ids() {
            counts[id.layer as usize - 1][id.index as usize] += 1;
        }
    }
    // Layer 1 is always fully included; start at layer 2.
    for layer in 2..=depth {
        let layer_counts = &counts[layer as usize - 1];
        let total: u64 = layer_counts.iter().map(|&c| c as u64).sum();
        let p = total as f64 / (trials as f64 * layer_counts.len() as f64);
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        let expect = trials as f64 * p;
        for (i, &count) in layer_counts.iter().enumerate() {
            let dev = (count as f64 - expect).abs();
            assert!(
                dev <= 3.0 * sigma,
                "layer {layer} symbol {i}: count {count}, expected {expect:.1} +- {:.1}",
                3.0 * sigma
            );
        }
    }
}

/// With c = 1 the subtree is one sibling group per layer plus the full top
/// layer: a constant-size footprint.
#[test]
fn single_sample_subtree_has_constant_footprint() {
    let layout = cover::cmt::Layout::for_base(256, 4);
    for seed in 0..100 {
        let sub = sample_subtree(&layout, 1, seed);
        for layer in 2..=layout.depth() {
            assert_eq!(sub.desired(layer).len(), 4);
        }
        assert_eq!(sub.desired(1).len(), 4);
    }
}
