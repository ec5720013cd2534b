//! SHA-256 hashing with domain separation.
//!
//! Every hash in the protocol is domain-tagged so that bytes hashed in one
//! role (a Merkle leaf, an internal node, a coded-tree symbol, ...) can never
//! be replayed in another. The hash function is fixed here, in one place;
//! all golden test vectors assume it.

use sha2::{Digest as _, Sha256};
use std::fmt;

/// Domain tag for Merkle tree leaves.
pub const TAG_LEAF: u8 = 0x00;
/// Domain tag for internal Merkle tree nodes.
pub const TAG_NODE: u8 = 0x01;
/// Domain tag for coded-Merkle-tree symbols (and the tree root commitment).
pub const TAG_SYMBOL: u8 = 0x02;
/// Domain tag for transaction ids.
pub const TAG_TXID: u8 = 0x03;
/// Domain tag for block header hashes.
pub const TAG_HEADER: u8 = 0x04;
/// Domain tag for deriving account identities in the keyed test signature scheme.
pub const TAG_ACCOUNT: u8 = 0x05;
/// Domain tag for the keyed test signature scheme.
pub const TAG_MOCK_SIG: u8 = 0x06;
/// Domain tag for network message de-duplication keys.
pub const TAG_MESSAGE: u8 = 0x07;
/// Domain tag for deriving per-layer code seeds from a master code seed.
pub const TAG_SEED: u8 = 0x08;

/// A 256-bit hash value. Always exactly 32 bytes.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const LEN: usize = 32;

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        let arr: [u8; 32] = bytes.try_into().ok()?;
        Some(Digest(arr))
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Leading 8 bytes as a big-endian integer, used for partitioning the
    /// identity space into contiguous ranges.
    pub fn leading_u64(&self) -> u64 {
        u64::from_be_bytes(self.0[..8].try_into().unwrap())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({}..)", &self.to_hex()[..12])
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// Hash `data` under the given domain tag.
pub fn tagged_hash(tag: u8, data: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update([tag]);
    h.update(data);
    Digest(h.finalize().into())
}

/// Hash the concatenation of several byte strings under a domain tag.
pub fn tagged_hash_parts(tag: u8, parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    h.update([tag]);
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

/// Hash of a Merkle leaf.
pub fn leaf_hash(data: &[u8]) -> Digest {
    tagged_hash(TAG_LEAF, data)
}

/// Hash of an internal Merkle node from its two children.
pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    tagged_hash_parts(TAG_NODE, &[&left.0, &right.0])
}

/// Hash of a coded-Merkle-tree symbol.
pub fn symbol_hash(bytes: &[u8]) -> Digest {
    tagged_hash(TAG_SYMBOL, bytes)
}

/// Derive a 64-bit sub-seed from a master seed and a context index.
pub fn derive_seed(master: u64, context: u64) -> u64 {
    let mut buf = [0u8; 16];
    buf[..8].copy_from_slice(&master.to_le_bytes());
    buf[8..].copy_from_slice(&context.to_le_bytes());
    let d = tagged_hash(TAG_SEED, &buf);
    u64::from_le_bytes(d.0[..8].try_into().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_32_bytes_and_deterministic() {
        let a = tagged_hash(TAG_LEAF, b"hello");
        let b = tagged_hash(TAG_LEAF, b"hello");
        assert_eq!(a, b);
        assert_eq!(a.as_bytes().len(), 32);
    }

    #[test]
    fn tags_separate_domains() {
        assert_ne!(tagged_hash(TAG_LEAF, b"x"), tagged_hash(TAG_NODE, b"x"));
        assert_ne!(tagged_hash(TAG_LEAF, b"x"), tagged_hash(TAG_SYMBOL, b"x"));
    }

    #[test]
    fn derive_seed_depends_on_context() {
        assert_ne!(derive_seed(7, 1), derive_seed(7, 2));
        assert_eq!(derive_seed(7, 1), derive_seed(7, 1));
    }
}
