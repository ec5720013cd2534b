//! Plain binary Merkle trees with membership proofs.
//!
//! Leaves and internal nodes are hashed under distinct domain tags, so no
//! leaf can masquerade as an internal node. Odd layers are padded by
//! duplicating the final digest.

use crate::hash::{leaf_hash, node_hash, Digest};
use crate::wire::{Reader, WireError, Writer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MerkleError {
    #[error("empty tree")]
    EmptyTree,
    #[error("leaf index {index} out of range (leaf count {count})")]
    IndexOutOfRange { index: u64, count: usize },
}

/// Which side the sibling digest sits on when recombining.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A membership proof for one leaf: the sibling digest at every level plus
/// the root the path must reproduce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MerkleProof {
    pub leaf_index: u64,
    pub path: Vec<(Digest, Side)>,
    pub root: Digest,
}

impl MerkleProof {
    /// True iff recomputing hashes along the path from `leaf` reproduces
    /// `self.root` and the side flags agree with `leaf_index`.
    pub fn verify(&self, leaf: &[u8]) -> bool {
        let mut acc = leaf_hash(leaf);
        let mut index = self.leaf_index;
        for (sibling, side) in &self.path {
            let expected = if index & 1 == 0 { Side::Right } else { Side::Left };
            if *side != expected {
                return false;
            }
            acc = match side {
                Side::Left => node_hash(sibling, &acc),
                Side::Right => node_hash(&acc, sibling),
            };
            index >>= 1;
        }
        index == 0 && acc == self.root
    }

    /// Verify against an externally trusted root.
    pub fn verify_against(&self, root: &Digest, leaf: &[u8]) -> bool {
        self.root == *root && self.verify(leaf)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_u64(self.leaf_index);
        w.put_u16(self.path.len() as u16);
        for (digest, side) in &self.path {
            w.put_u8(match side {
                Side::Left => 0,
                Side::Right => 1,
            });
            w.put_digest(digest);
        }
        w.put_digest(&self.root);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let leaf_index = r.get_u64("leaf_index")?;
        let len = r.get_u16("path length")? as usize;
        let mut path = Vec::with_capacity(len);
        for _ in 0..len {
            let side = match r.get_u8("side")? {
                0 => Side::Left,
                1 => Side::Right,
                _ => return Err(WireError::Malformed("side flag")),
            };
            let digest = r.get_digest("sibling")?;
            path.push((digest, side));
        }
        let root = r.get_digest("root")?;
        r.expect_end()?;
        Ok(MerkleProof { leaf_index, path, root })
    }
}

/// A built tree retaining every level for proof extraction.
#[derive(Debug, Clone)]
pub struct MerkleTree {
    /// levels[0] is the leaf digests; the last level has a single root digest.
    levels: Vec<Vec<Digest>>,
}

/// Build a tree over the given leaves. Returns the root and a handle that
/// supports proof extraction.
pub fn build_merkle_tree<L: AsRef<[u8]>>(leaves: &[L]) -> Result<(Digest, MerkleTree), MerkleError> {
    if leaves.is_empty() {
        return Err(MerkleError::EmptyTree);
    }
    let mut level: Vec<Digest> = leaves.iter().map(|l| leaf_hash(l.as_ref())).collect();
    let mut levels = vec![level.clone()];
    while level.len() > 1 {
        if level.len() % 2 == 1 {
            level.push(*level.last().unwrap());
        }
        level = level.chunks(2).map(|pair| node_hash(&pair[0], &pair[1])).collect();
        levels.push(level.clone());
    }
    let root = levels.last().unwrap()[0];
    Ok((root, MerkleTree { levels }))
}

impl MerkleTree {
    pub fn root(&self) -> Digest {
        self.levels.last().unwrap()[0]
    }

    pub fn leaf_count(&self) -> usize {
        self.levels[0].len()
    }

    pub fn prove(&self, leaf_index: usize) -> Result<MerkleProof, MerkleError> {
        if leaf_index >= self.leaf_count() {
            return Err(MerkleError::IndexOutOfRange {
                index: leaf_index as u64,
                count: self.leaf_count(),
            });
        }
        let mut path = Vec::new();
        let mut index = leaf_index;
        for level in &self.levels[..self.levels.len() - 1] {
            let sibling_index = index ^ 1;
            // Odd level: the padded duplicate of the last digest.
            let sibling = if sibling_index < level.len() {
                level[sibling_index]
            } else {
                level[index]
            };
            let side = if index & 1 == 0 { Side::Right } else { Side::Left };
            path.push((sibling, side));
            index >>= 1;
        }
        Ok(MerkleProof {
            leaf_index: leaf_index as u64,
            path,
            root: self.root(),
        })
    }
}
