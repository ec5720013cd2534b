//! Pluggable signatures. Accounts are 32-byte public identities.
//!
//! Two schemes: Ed25519 for integration realism, and a keyed-hash test
//! scheme whose signatures are deterministic and reproducible in golden
//! vectors. The test scheme has no secret at all — anyone can produce a
//! "valid" signature — which is exactly what makes it useful for fixtures
//! and useless for security.

use crate::hash::{tagged_hash, tagged_hash_parts, TAG_ACCOUNT, TAG_MOCK_SIG};
use ring::signature::KeyPair as _;
use std::fmt;

/// A 32-byte public account identity.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AccountId(pub [u8; 32]);

impl AccountId {
    pub fn leading_u64(&self) -> u64 {
        u64::from_be_bytes(self.0[..8].try_into().unwrap())
    }
}

impl fmt::Debug for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Account({:02x}{:02x}..)", self.0[0], self.0[1])
    }
}

/// Which contiguous range of the identity space an account falls in.
pub fn section_of(account: &AccountId, k: u32) -> u32 {
    debug_assert!(k >= 1);
    ((account.leading_u64() as u128 * k as u128) >> 64) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigScheme {
    /// Keyed-hash test scheme; anyone can forge it.
    Mock,
    /// Real asymmetric signatures.
    Ed25519,
}

#[derive(Clone)]
enum Secret {
    Mock,
    Ed25519([u8; 32]),
}

#[derive(Clone)]
pub struct KeyPair {
    pub account: AccountId,
    secret: Secret,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyPair({:?})", self.account)
    }
}

impl KeyPair {
    /// Deterministic key generation from a seed pair.
    pub fn generate(scheme: SigScheme, seed: u64, salt: u64) -> KeyPair {
        let mut buf = [0u8; 16];
        buf[..8].copy_from_slice(&seed.to_le_bytes());
        buf[8..].copy_from_slice(&salt.to_le_bytes());
        match scheme {
            SigScheme::Mock => KeyPair {
                account: AccountId(tagged_hash(TAG_ACCOUNT, &buf).0),
                secret: Secret::Mock,
            },
            SigScheme::Ed25519 => {
                let seed_bytes = tagged_hash(TAG_ACCOUNT, &buf).0;
                let kp = ring::signature::Ed25519KeyPair::from_seed_unchecked(&seed_bytes)
                    .expect("32-byte seed");
                let account = AccountId(kp.public_key().as_ref().try_into().expect("32-byte key"));
                KeyPair {
                    account,
                    secret: Secret::Ed25519(seed_bytes),
                }
            }
        }
    }

    /// A key whose account lands in the given section; rejection-samples
    /// for Ed25519, crafts the leading bytes directly for the test scheme.
    pub fn generate_in_section(scheme: SigScheme, k: u32, section: u32, seed: u64, salt: u64) -> KeyPair {
        match scheme {
            SigScheme::Mock => {
                let base = KeyPair::generate(scheme, seed, salt);
                let lo = ((section as u128) << 64) / k as u128;
                let hi = (((section + 1) as u128) << 64) / k as u128;
                let width = (hi - lo).max(1);
                let offset = base.account.leading_u64() as u128 % width;
                let lead = ((lo + offset) as u64).to_be_bytes();
                let mut id = base.account.0;
                id[..8].copy_from_slice(&lead);
                let kp = KeyPair {
                    account: AccountId(id),
                    secret: Secret::Mock,
                };
                debug_assert_eq!(section_of(&kp.account, k), section);
                kp
            }
            SigScheme::Ed25519 => {
                let mut salt = salt;
                loop {
                    let kp = KeyPair::generate(scheme, seed, salt);
                    if section_of(&kp.account, k) == section {
                        return kp;
                    }
                    salt = salt.wrapping_add(0x9e3779b97f4a7c15);
                }
            }
        }
    }

    pub fn sign(&self, msg: &[u8]) -> Vec<u8> {
        match &self.secret {
            Secret::Mock => mock_signature(&self.account, msg),
            Secret::Ed25519(seed) => {
                let kp = ring::signature::Ed25519KeyPair::from_seed_unchecked(seed).expect("seed");
                kp.sign(msg).as_ref().to_vec()
            }
        }
    }
}

fn mock_signature(account: &AccountId, msg: &[u8]) -> Vec<u8> {
    tagged_hash_parts(TAG_MOCK_SIG, &[&account.0, msg]).0.to_vec()
}

pub fn verify_signature(scheme: SigScheme, account: &AccountId, msg: &[u8], sig: &[u8]) -> bool {
    match scheme {
        SigScheme::Mock => sig == mock_signature(account, msg).as_slice(),
        SigScheme::Ed25519 => {
            ring::signature::UnparsedPublicKey::new(&ring::signature::ED25519, &account.0)
                .verify(msg, sig)
                .is_ok()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn section_endpoints() {
        assert_eq!(section_of(&AccountId([0x00; 32]), 1), 0);
        assert_eq!(section_of(&AccountId([0xFF; 32]), 1), 0);
        assert_eq!(section_of(&AccountId([0x00; 32]), 4), 0);
        assert_eq!(section_of(&AccountId([0xFF; 32]), 4), 3);
    }

    #[test]
    fn sign_verify_round_trip_both_schemes() {
        for scheme in [SigScheme::Mock, SigScheme::Ed25519] {
            let kp = KeyPair::generate(scheme, 1, 2);
            let sig = kp.sign(b"message");
            assert!(verify_signature(scheme, &kp.account, b"message", &sig));
            assert!(!verify_signature(scheme, &kp.account, b"other", &sig));
            let mut bad = sig.clone();
            bad[0] ^= 1;
            assert!(!verify_signature(scheme, &kp.account, b"message", &bad));
        }
    }

    #[test]
    fn section_targeted_generation() {
        for scheme in [SigScheme::Mock, SigScheme::Ed25519] {
            for section in 0..4 {
                let kp = KeyPair::generate_in_section(scheme, 4, section, 7, section as u64);
                assert_eq!(section_of(&kp.account, 4), section, "{scheme:?}");
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = KeyPair::generate(SigScheme::Ed25519, 3, 4);
        let b = KeyPair::generate(SigScheme::Ed25519, 3, 4);
        assert_eq!(a.account, b.account);
        assert_eq!(a.sign(b"x"), b.sign(b"x"));
    }
}
