//! Collaborative light-node block verification and data availability.
//!
//! The protocol core: domain-separated hashing and Merkle commitments,
//! rate-1/2 LDPC erasure codes with peeling decoding, the layered coded
//! Merkle tree with interleaved subtree sampling and coding fraud proofs,
//! and the UTXO ledger with transaction fraud proofs. Everything here is
//! deterministic and network-free; the companion simulator crate drives
//! these pieces over a message-passing network.

pub mod cmt;
pub mod fixtures;
mod gf2;
pub mod hash;
pub mod ledger;
pub mod ldpc;
pub mod merkle;
pub mod wire;

pub use hash::Digest;
