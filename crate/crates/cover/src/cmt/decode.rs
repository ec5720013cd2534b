//! Classical (single-node) tree decoding: layer by layer from the top,
//! peeling degree-one parity equations and checking each newly decoded
//! symbol's hash against the layer above.

use super::{build_proof, build_fraud_proof, CmtContext, CodingFraudProof, SymbolId, SymbolProof};
use crate::hash::{symbol_hash, Digest};
use crate::ldpc::xor_into;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug)]
pub enum DecodeOutcome {
    /// Every layer decoded and every parity equation satisfied. Carries the
    /// full symbol arrays, top layer first.
    Decoded(Vec<Vec<Vec<u8>>>),
    /// Peeling stalled in this layer: the hidden symbols contain a stopping
    /// set.
    Unavailable { layer: u16 },
    /// A parity equation is inconsistent with the hash commitments.
    Fraud(Box<CodingFraudProof>),
}

/// Decode the whole tree from revealed symbols. Symbols with invalid proofs
/// are discarded, not fatal. Valid proofs also reveal their ancestor data
/// symbols (they are bound to the root by the proof chain).
pub fn decode_tree_classical(
    ctx: &CmtContext,
    root: &Digest,
    revealed: &[(SymbolId, Vec<u8>, SymbolProof)],
) -> DecodeOutcome {
    let layout = &ctx.layout;
    let depth = layout.depth();
    let mut known: Vec<BTreeMap<u32, Vec<u8>>> = vec![BTreeMap::new(); depth as usize];

    for (id, bytes, proof) in revealed {
        if proof.id != *id || !proof.verify(root, layout, bytes) {
            continue;
        }
        known[id.layer as usize - 1].insert(id.index, bytes.clone());
        // Harvest root-bound ancestors: parent chain and top co-symbols.
        let mut cur = *id;
        for parent_bytes in &proof.ancestors {
            let (parent, _) = layout.parent_slot(cur);
            known[parent.layer as usize - 1].insert(parent.index, parent_bytes.clone());
            cur = parent;
        }
        for (index, bytes) in &proof.top_others {
            known[0].insert(*index, bytes.clone());
        }
    }

    if known[0].len() < layout.total_width(1) {
        return DecodeOutcome::Unavailable { layer: 1 };
    }

    for layer in 2..=depth {
        // Hashes of every layer symbol, read out of the decoded layer above.
        let hashes = layer_hashes(ctx, layer, &known[layer as usize - 2]);
        // Revealed symbols whose hash disagrees with the commitment cannot
        // occur: their proofs embed the same parent bytes.
        match decode_layer(ctx, layer, &hashes, &mut known) {
            LayerResult::Done => {}
            LayerResult::Stuck => return DecodeOutcome::Unavailable { layer },
            LayerResult::Fraud(p) => return DecodeOutcome::Fraud(p),
        }
    }

    let layers: Vec<Vec<Vec<u8>>> = (1..=depth)
        .map(|layer| {
            let map = &known[layer as usize - 1];
            (0..layout.total_width(layer) as u32)
                .map(|i| map[&i].clone())
                .collect()
        })
        .collect();
    DecodeOutcome::Decoded(layers)
}

/// Committed hashes of all `layer` symbols from the data symbols above.
pub(crate) fn layer_hashes(
    ctx: &CmtContext,
    layer: u16,
    parent_data: &BTreeMap<u32, Vec<u8>>,
) -> Vec<Digest> {
    let layout = &ctx.layout;
    let total = layout.total_width(layer);
    let mut hashes = vec![Digest::default(); total];
    for index in 0..total as u32 {
        let (parent, slot) = layout.parent_slot(SymbolId::new(layer, index));
        let bytes = &parent_data[&parent.index];
        hashes[index as usize] = Digest::from_slice(&bytes[slot * 32..(slot + 1) * 32]).unwrap();
    }
    hashes
}

enum LayerResult {
    Done,
    Stuck,
    Fraud(Box<CodingFraudProof>),
}

fn decode_layer(
    ctx: &CmtContext,
    layer: u16,
    hashes: &[Digest],
    known: &mut [BTreeMap<u32, Vec<u8>>],
) -> LayerResult {
    let layout = &ctx.layout;
    let code = ctx.code(layer);
    let total = layout.total_width(layer);
    let width = layout.symbol_size(layer, ctx.params.symbol_size);
    let (upper, rest) = known.split_at_mut(layer as usize - 1);
    let values = &mut rest[0];
    values.retain(|&i, _| (i as usize) < total);

    let mut unknown_degree: Vec<usize> = (0..code.check_count())
        .map(|c| {
            code.check_members(c as u32)
                .iter()
                .filter(|s| !values.contains_key(s))
                .count()
        })
        .collect();
    let mut worklist: BTreeSet<u32> = unknown_degree
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 1)
        .map(|(c, _)| c as u32)
        .collect();

    while let Some(c) = worklist.pop_first() {
        if unknown_degree[c as usize] != 1 {
            continue;
        }
        let members = code.check_members(c);
        let target = *members.iter().find(|s| !values.contains_key(s)).unwrap();
        let mut acc = vec![0u8; width];
        for &s in members {
            if s != target {
                xor_into(&mut acc, &values[&s]);
            }
        }
        let committed = hashes[target as usize];
        if symbol_hash(&acc) != committed {
            return LayerResult::Fraud(Box::new(fraud_from_layer(
                ctx, layer, c, target, acc, committed, upper, values,
            )));
        }
        values.insert(target, acc);
        for &c2 in code.checks_of(target) {
            unknown_degree[c2 as usize] -= 1;
            if unknown_degree[c2 as usize] == 1 {
                worklist.insert(c2);
            }
        }
    }

    if values.len() < total {
        return LayerResult::Stuck;
    }
    // Checks that never reached degree one during peeling have not been
    // validated yet; audit them all.
    for c in 0..code.check_count() as u32 {
        let members = code.check_members(c);
        let mut acc = vec![0u8; width];
        for &s in members {
            xor_into(&mut acc, &values[&s]);
        }
        if acc.iter().any(|&b| b != 0) {
            // Name the lowest member as the incorrectly decoded symbol: the
            // XOR of the others differs from its committed value.
            let target = members[0];
            let mut decoded = vec![0u8; width];
            for &s in members {
                if s != target {
                    xor_into(&mut decoded, &values[&s]);
                }
            }
            let committed = hashes[target as usize];
            return LayerResult::Fraud(Box::new(fraud_from_layer(
                ctx, layer, c, target, decoded, committed, upper, values,
            )));
        }
    }
    LayerResult::Done
}

#[allow(clippy::too_many_arguments)]
fn fraud_from_layer(
    ctx: &CmtContext,
    layer: u16,
    check: u32,
    target: u32,
    decoded: Vec<u8>,
    committed: Digest,
    upper: &[BTreeMap<u32, Vec<u8>>],
    values: &BTreeMap<u32, Vec<u8>>,
) -> CodingFraudProof {
    let layout = &ctx.layout;
    let get = |pid: SymbolId| upper[pid.layer as usize - 1].get(&pid.index).cloned();
    let hash_proof = build_proof(layout, SymbolId::new(layer, target), get)
        .expect("upper layers fully decoded");
    build_fraud_proof(
        ctx,
        layer,
        check,
        target,
        decoded,
        committed,
        hash_proof,
        |s| {
            let id = SymbolId::new(layer, s);
            let bytes = values[&s].clone();
            let proof = build_proof(layout, id, get).expect("upper layers fully decoded");
            (bytes, proof)
        },
    )
}

#[cfg(test)]
mod tests {
    use super::super::{build_tree, sample_subtree, verify_coding_fraud_proof, CmtContext, CmtParams};
    use super::*;

    fn make(base_len: usize, code_seed: u64) -> (CmtContext, super::super::CodedMerkleTree) {
        let ctx = CmtContext::new(
            CmtParams {
                symbol_size: 40,
                code_seed,
                ..CmtParams::default()
            },
            base_len,
        )
        .unwrap();
        let base: Vec<Vec<u8>> = (0..base_len)
            .map(|i| vec![(i as u8).wrapping_mul(29).wrapping_add(3); 40])
            .collect();
        let tree = build_tree(&ctx, &base).unwrap();
        (ctx, tree)
    }

    fn reveal_all(
        ctx: &CmtContext,
        tree: &super::super::CodedMerkleTree,
        skip: &dyn Fn(SymbolId) -> bool,
    ) -> Vec<(SymbolId, Vec<u8>, SymbolProof)> {
        tree.all_ids()
            .filter(|id| !skip(*id))
            .map(|id| {
                (
                    id,
                    tree.symbol(id).to_vec(),
                    tree.symbol_proof(&ctx.layout, id),
                )
            })
            .collect()
    }

    #[test]
    fn full_reveal_decodes_to_tree_contents() {
        let (ctx, tree) = make(16, 5);
        let revealed = reveal_all(&ctx, &tree, &|_| false);
        match decode_tree_classical(&ctx, &tree.root(), &revealed) {
            DecodeOutcome::Decoded(layers) => {
                for layer in 1..=tree.depth() {
                    assert_eq!(layers[layer as usize - 1], tree.layer(layer));
                }
            }
            other => panic!("expected decode, got {other:?}"),
        }
    }

    #[test]
    fn invalid_proofs_are_discarded() {
        let (ctx, tree) = make(16, 5);
        let bottom = tree.depth();
        let mut revealed = reveal_all(&ctx, &tree, &|_| false);
        // Corrupt a few bottom payloads: their proofs fail, the symbols are
        // discarded, and peeling recovers the honest values.
        let corrupted = [1u32, 8, 20];
        for entry in revealed.iter_mut() {
            if entry.0.layer == bottom && corrupted.contains(&entry.0.index) {
                entry.1[0] ^= 0xff;
            }
        }
        match decode_tree_classical(&ctx, &tree.root(), &revealed) {
            DecodeOutcome::Decoded(layers) => {
                assert_eq!(layers[bottom as usize - 1], tree.layer(bottom));
            }
            other => panic!("expected decode, got {other:?}"),
        }
    }

    #[test]
    fn hidden_stopping_set_is_unavailable() {
        let (ctx, tree) = make(16, 5);
        // Exhaustive oracle on the smallest coded layer (2n = 16). Hiding a
        // data symbol requires hiding its descendants too: their proofs
        // would reveal it.
        let layer = 2u16;
        let report = ctx.code(layer).stopping_sets_exhaustive().unwrap();
        let hidden = report.minimal[0].clone();
        let withheld = ctx.layout.withhold_closure(layer, &hidden);
        let revealed = reveal_all(&ctx, &tree, &|id| withheld.contains(&id));
        match decode_tree_classical(&ctx, &tree.root(), &revealed) {
            DecodeOutcome::Unavailable { layer: l } => assert_eq!(l, layer),
            other => panic!("expected unavailable, got {other:?}"),
        }
    }

    #[test]
    fn hidden_non_stopping_symbols_still_decode() {
        let (ctx, tree) = make(16, 5);
        let bottom = tree.depth();
        // Hide a couple of bottom symbols that do not form a stopping set.
        let code = ctx.code(bottom);
        let hidden: std::collections::BTreeSet<u32> = [0u32, 9].into_iter().collect();
        assert!(code.peel_remainder(&hidden).is_empty(), "test premise");
        let revealed = reveal_all(&ctx, &tree, &|id| {
            id.layer == bottom && hidden.contains(&id.index)
        });
        assert!(matches!(
            decode_tree_classical(&ctx, &tree.root(), &revealed),
            DecodeOutcome::Decoded(_)
        ));
    }

    #[test]
    fn single_check_corruption_yields_verifying_fraud_proof() {
        let (ctx, mut tree) = make(16, 5);
        let layer = tree.depth();
        // Corrupt the committed coded symbols solving check 0 exclusively.
        let indices = ctx.code(layer).single_check_corruption(0).unwrap();
        tree.corrupt_and_recommit(&ctx, layer, &indices, &[0x01]);
        let revealed = reveal_all(&ctx, &tree, &|_| false);
        match decode_tree_classical(&ctx, &tree.root(), &revealed) {
            DecodeOutcome::Fraud(proof) => {
                assert_eq!(proof.layer, layer);
                assert!(verify_coding_fraud_proof(&ctx, &tree.root(), &proof));
            }
            other => panic!("expected fraud, got {other:?}"),
        }
    }

    #[test]
    fn honest_tree_fraud_proof_mutations_all_fail() {
        let (ctx, mut tree) = make(16, 7);
        let layer = tree.depth();
        let indices = ctx.code(layer).single_check_corruption(1).unwrap();
        tree.corrupt_and_recommit(&ctx, layer, &indices, &[0x02]);
        let revealed = reveal_all(&ctx, &tree, &|_| false);
        let proof = match decode_tree_classical(&ctx, &tree.root(), &revealed) {
            DecodeOutcome::Fraud(p) => *p,
            other => panic!("expected fraud, got {other:?}"),
        };
        // Honest symbol in place of the decoded one: parity holds, proof fails.
        let honest_root = make(16, 7).1.root();
        assert!(!verify_coding_fraud_proof(&ctx, &honest_root, &proof));
    }

    #[test]
    fn subtree_only_reveal_decodes_with_full_publication() {
        // Coverage sanity: revealing everything but asking only for proofs
        // mirrors what the miner publishes.
        let (ctx, tree) = make(64, 3);
        let sub = sample_subtree(&ctx.layout, 4, 77);
        assert!(sub.total_len() >= 4 * (tree.depth() as usize - 1));
        let revealed = reveal_all(&ctx, &tree, &|_| false);
        assert!(matches!(
            decode_tree_classical(&ctx, &tree.root(), &revealed),
            DecodeOutcome::Decoded(_)
        ));
    }
}
