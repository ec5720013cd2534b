//! Symbol membership proofs: the chain of ancestor data symbols up to the
//! top layer, plus the remaining top-layer symbols needed to recompute the
//! root commitment. An ancestor's bytes are the four hashes of its child
//! group, so the proof carries the committed hash of the proven position.

use super::{Layout, SymbolId};
use crate::hash::{symbol_hash, Digest};
use crate::wire::{Reader, WireError, Writer};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolProof {
    pub id: SymbolId,
    /// Bytes of the ancestor data symbols, from the parent (layer id.layer-1)
    /// up to and including the layer-1 ancestor.
    pub ancestors: Vec<Vec<u8>>,
    /// The other top-layer symbols, by index, so the root hash can be
    /// recomputed. Empty when the top layer has a single symbol.
    pub top_others: Vec<(u32, Vec<u8>)>,
}

/// Assemble a proof for `id` from any source of symbol bytes (a full tree,
/// or a validator's store of decoded data symbols). Returns None when some
/// required ancestor is unknown.
pub fn build_proof<F>(layout: &Layout, id: SymbolId, mut get: F) -> Option<SymbolProof>
where
    F: FnMut(SymbolId) -> Option<Vec<u8>>,
{
    let mut ancestors = Vec::new();
    let mut cur = id;
    while cur.layer >= 2 {
        let (parent, _) = layout.parent_slot(cur);
        ancestors.push(get(parent)?);
        cur = parent;
    }
    let mut top_others = Vec::new();
    for index in 0..layout.total_width(1) as u32 {
        if index != cur.index {
            top_others.push((index, get(SymbolId::new(1, index))?));
        }
    }
    Some(SymbolProof {
        id,
        ancestors,
        top_others,
    })
}

impl SymbolProof {
    /// Verify that `bytes` is the committed symbol at `self.id` under `root`.
    pub fn verify(&self, root: &Digest, layout: &Layout, bytes: &[u8]) -> bool {
        if !layout.in_range(self.id) {
            return false;
        }
        if self.id.layer == 1 {
            return self.ancestors.is_empty() && self.verify_top(root, layout, self.id.index, bytes);
        }
        self.verify_committed_digest(root, layout, &symbol_hash(bytes))
    }

    /// Verify that `digest` is the committed hash of position `self.id`
    /// without knowing the symbol bytes. Layers >= 2 only (the top layer is
    /// committed by value, not by hash).
    pub fn verify_committed_digest(&self, root: &Digest, layout: &Layout, digest: &Digest) -> bool {
        if !layout.in_range(self.id) || self.id.layer < 2 {
            return false;
        }
        if self.ancestors.len() != self.id.layer as usize - 1 {
            return false;
        }
        let mut expect = *digest;
        let mut cur = self.id;
        for parent_bytes in &self.ancestors {
            if parent_bytes.len() != super::UPPER_SYMBOL_SIZE {
                return false;
            }
            let (parent, slot) = layout.parent_slot(cur);
            if parent_bytes[slot * 32..(slot + 1) * 32] != expect.0 {
                return false;
            }
            expect = symbol_hash(parent_bytes);
            cur = parent;
        }
        debug_assert_eq!(cur.layer, 1);
        self.verify_top(root, layout, cur.index, self.ancestors.last().unwrap())
    }

    /// Recompute the root from the top ancestor plus `top_others`.
    fn verify_top(&self, root: &Digest, layout: &Layout, own_index: u32, own_bytes: &[u8]) -> bool {
        let width = layout.total_width(1);
        let mut top: Vec<Option<&[u8]>> = vec![None; width];
        if own_index as usize >= width {
            return false;
        }
        top[own_index as usize] = Some(own_bytes);
        for (index, bytes) in &self.top_others {
            let i = *index as usize;
            if i >= width || top[i].is_some() {
                return false;
            }
            top[i] = Some(bytes);
        }
        let mut concat = Vec::new();
        for slot in top {
            match slot {
                Some(b) => concat.extend_from_slice(b),
                None => return false,
            }
        }
        symbol_hash(&concat) == *root
    }

    /// The committed hash of the proven position, as carried by the parent
    /// ancestor. None for top-layer proofs.
    pub fn committed_digest(&self, layout: &Layout) -> Option<Digest> {
        if self.id.layer < 2 || self.ancestors.is_empty() {
            return None;
        }
        let (_, slot) = layout.parent_slot(self.id);
        Digest::from_slice(&self.ancestors[0][slot * 32..(slot + 1) * 32])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_u16(self.id.layer);
        w.put_u32(self.id.index);
        w.put_u16(self.ancestors.len() as u16);
        for a in &self.ancestors {
            w.put_bytes(a);
        }
        w.put_u16(self.top_others.len() as u16);
        for (i, b) in &self.top_others {
            w.put_u32(*i);
            w.put_bytes(b);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let p = Self::read_from(&mut r)?;
        r.expect_end()?;
        Ok(p)
    }

    pub(crate) fn read_from(r: &mut Reader) -> Result<Self, WireError> {
        let layer = r.get_u16("layer")?;
        let index = r.get_u32("index")?;
        let n_anc = r.get_u16("ancestor count")? as usize;
        let mut ancestors = Vec::with_capacity(n_anc);
        for _ in 0..n_anc {
            ancestors.push(r.get_bytes("ancestor")?);
        }
        let n_top = r.get_u16("top count")? as usize;
        let mut top_others = Vec::with_capacity(n_top);
        for _ in 0..n_top {
            let i = r.get_u32("top index")?;
            let b = r.get_bytes("top symbol")?;
            top_others.push((i, b));
        }
        Ok(SymbolProof {
            id: SymbolId::new(layer, index),
            ancestors,
            top_others,
        })
    }

    pub fn byte_size(&self) -> usize {
        self.to_bytes().len()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_tree, CmtContext, CmtParams};
    use super::*;

    fn small_tree() -> (CmtContext, super::super::CodedMerkleTree) {
        let ctx = CmtContext::new(
            CmtParams {
                symbol_size: 48,
                ..CmtParams::default()
            },
            16,
        )
        .unwrap();
        let base: Vec<Vec<u8>> = (0u8..16).map(|i| vec![i.wrapping_add(1); 48]).collect();
        let tree = build_tree(&ctx, &base).unwrap();
        (ctx, tree)
    }

    #[test]
    fn round_trip_every_symbol() {
        let (ctx, tree) = small_tree();
        let root = tree.root();
        for id in tree.all_ids() {
            let proof = tree.symbol_proof(&ctx.layout, id);
            assert!(proof.verify(&root, &ctx.layout, tree.symbol(id)), "{id}");
        }
    }

    #[test]
    fn flipped_byte_fails() {
        let (ctx, tree) = small_tree();
        let id = SymbolId::new(tree.depth(), 5);
        let proof = tree.symbol_proof(&ctx.layout, id);
        let mut bytes = tree.symbol(id).to_vec();
        bytes[0] ^= 1;
        assert!(!proof.verify(&tree.root(), &ctx.layout, &bytes));
    }

    #[test]
    fn proof_bound_to_position() {
        let (ctx, tree) = small_tree();
        let id = SymbolId::new(tree.depth(), 6);
        let mut proof = tree.symbol_proof(&ctx.layout, id);
        proof.id = SymbolId::new(tree.depth(), 7);
        assert!(!proof.verify(&tree.root(), &ctx.layout, tree.symbol(id)));
    }

    #[test]
    fn committed_digest_verifies_without_bytes() {
        let (ctx, tree) = small_tree();
        let id = SymbolId::new(2, 3);
        let proof = tree.symbol_proof(&ctx.layout, id);
        let digest = crate::hash::symbol_hash(tree.symbol(id));
        assert!(proof.verify_committed_digest(&tree.root(), &ctx.layout, &digest));
        assert_eq!(proof.committed_digest(&ctx.layout), Some(digest));
        let mut wrong = digest;
        wrong.0[0] ^= 1;
        assert!(!proof.verify_committed_digest(&tree.root(), &ctx.layout, &wrong));
    }

    #[test]
    fn wire_round_trip() {
        let (ctx, tree) = small_tree();
        let id = SymbolId::new(tree.depth(), 12);
        let proof = tree.symbol_proof(&ctx.layout, id);
        let decoded = SymbolProof::from_bytes(&proof.to_bytes()).unwrap();
        assert_eq!(decoded, proof);
        assert!(decoded.verify(&tree.root(), &ctx.layout, tree.symbol(id)));
    }
}
