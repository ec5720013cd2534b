//! Coding fraud proofs: evidence that a committed parity equation does not
//! hold. The proof carries the incorrectly decoded symbol, its committed
//! hash with a path proof, and the d-1 known symbols of the parity equation
//! with their path proofs.

use super::{CmtContext, SymbolId, SymbolProof};
use crate::hash::{symbol_hash, Digest};
use crate::ldpc::xor_into;
use crate::wire::{Reader, WireError, Writer};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodingFraudProof {
    /// The newly decoded incorrect symbol.
    pub decoded: Vec<u8>,
    /// The committed hash of that position.
    pub committed: Digest,
    /// Path proof locating `committed` under the root.
    pub hash_proof: SymbolProof,
    /// The other symbols of the parity equation, with their path proofs.
    pub known: Vec<(Vec<u8>, SymbolProof)>,
    /// Which parity equation of `layer`'s code.
    pub check: u32,
    pub layer: u16,
}

impl CodingFraudProof {
    /// Position of the incorrectly decoded symbol.
    pub fn target(&self) -> SymbolId {
        self.hash_proof.id
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_bytes(&self.decoded);
        w.put_digest(&self.committed);
        w.put_bytes(&self.hash_proof.to_bytes());
        w.put_u16(self.known.len() as u16);
        for (bytes, _) in &self.known {
            w.put_bytes(bytes);
        }
        for (_, proof) in &self.known {
            w.put_bytes(&proof.to_bytes());
        }
        w.put_u32(self.check);
        w.put_u16(self.layer);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let decoded = r.get_bytes("decoded symbol")?;
        let committed = r.get_digest("committed hash")?;
        let hash_proof = SymbolProof::from_bytes(&r.get_bytes("hash proof")?)?;
        let count = r.get_u16("known count")? as usize;
        let mut symbols = Vec::with_capacity(count);
        for _ in 0..count {
            symbols.push(r.get_bytes("known symbol")?);
        }
        let mut known = Vec::with_capacity(count);
        for bytes in symbols {
            let proof = SymbolProof::from_bytes(&r.get_bytes("symbol proof")?)?;
            known.push((bytes, proof));
        }
        let check = r.get_u32("check id")?;
        let layer = r.get_u16("layer")?;
        r.expect_end()?;
        Ok(CodingFraudProof {
            decoded,
            committed,
            hash_proof,
            known,
            check,
            layer,
        })
    }

    pub fn byte_size(&self) -> usize {
        self.to_bytes().len()
    }
}

/// Check a coding fraud proof against a root commitment:
/// 1. the hash proof and all symbol proofs verify;
/// 2. the named check covers exactly these d positions;
/// 3. the decoded symbol is the XOR of the known symbols;
/// 4. the decoded symbol's hash differs from the committed hash.
pub fn verify_coding_fraud_proof(ctx: &CmtContext, root: &Digest, proof: &CodingFraudProof) -> bool {
    let layout = &ctx.layout;
    if proof.layer < 2 || proof.layer > layout.depth() {
        return false;
    }
    let target = proof.target();
    if target.layer != proof.layer || !layout.in_range(target) {
        return false;
    }
    if !proof.hash_proof.verify_committed_digest(root, layout, &proof.committed) {
        return false;
    }
    let mut positions: BTreeSet<u32> = BTreeSet::new();
    positions.insert(target.index);
    for (bytes, sp) in &proof.known {
        if sp.id.layer != proof.layer || !sp.verify(root, layout, bytes) {
            return false;
        }
        if !positions.insert(sp.id.index) {
            return false; // duplicate position
        }
    }
    let code = ctx.code(proof.layer);
    if proof.check as usize >= code.check_count() {
        return false;
    }
    let members: BTreeSet<u32> = code.check_members(proof.check).iter().copied().collect();
    if members != positions {
        return false;
    }
    let width = layout.symbol_size(proof.layer, ctx.params.symbol_size);
    if proof.decoded.len() != width || proof.known.iter().any(|(b, _)| b.len() != width) {
        return false;
    }
    let mut acc = vec![0u8; width];
    for (bytes, _) in &proof.known {
        xor_into(&mut acc, bytes);
    }
    if acc != proof.decoded {
        return false;
    }
    symbol_hash(&proof.decoded) != proof.committed
}

/// Assemble a fraud proof for `check` at `layer`, given the incorrectly
/// decoded target and a source of known symbol bytes and proofs.
#[allow(clippy::too_many_arguments)]
pub fn build_fraud_proof<F>(
    ctx: &CmtContext,
    layer: u16,
    check: u32,
    target: u32,
    decoded: Vec<u8>,
    committed: Digest,
    hash_proof: SymbolProof,
    mut known_source: F,
) -> CodingFraudProof
where
    F: FnMut(u32) -> (Vec<u8>, SymbolProof),
{
    let code = ctx.code(layer);
    let known = code
        .check_members(check)
        .iter()
        .filter(|&&s| s != target)
        .map(|&s| known_source(s))
        .collect();
    CodingFraudProof {
        decoded,
        committed,
        hash_proof,
        known,
        check,
        layer,
    }
}
