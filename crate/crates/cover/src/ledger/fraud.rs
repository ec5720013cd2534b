//! Transaction fraud proofs: an invalid transaction with its membership
//! proof, plus — for double spends — the past transaction with a colliding
//! input. Checkable by anyone holding the header chain.

use super::{validate_txn_stateless, ChainParams, HeaderChain, LedgerError, Transaction, TxValidity};
use crate::cmt::SymbolProof;
use crate::ledger::section_of;
use crate::wire::{Reader, WireError, Writer};

/// A committed transaction with its location: block height and the symbol
/// proof to that block's root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommittedTxn {
    pub txn: Transaction,
    pub height: u64,
    pub proof: SymbolProof,
}

impl CommittedTxn {
    pub fn position(&self) -> u32 {
        self.proof.id.index
    }

    fn verify_inclusion(&self, chain: &HeaderChain, params: &ChainParams) -> bool {
        let header = match chain.get(self.height) {
            Some(h) => h,
            None => return false,
        };
        let layout = header.layout(&params.cmt);
        let id = self.proof.id;
        if id.layer != layout.bottom() || id.index as u64 >= header.len {
            return false;
        }
        let mut padded = self.txn.to_bytes();
        if padded.len() > params.cmt.symbol_size {
            return false;
        }
        padded.resize(params.cmt.symbol_size, 0);
        self.proof.verify(&header.root, &layout, &padded)
    }

    fn write_to(&self, w: &mut Writer) {
        w.put_bytes(&self.txn.to_bytes());
        w.put_u64(self.height);
        w.put_bytes(&self.proof.to_bytes());
    }

    fn read_from(r: &mut Reader) -> Result<Self, WireError> {
        let txn = Transaction::from_bytes(&r.get_bytes("txn")?)?;
        let height = r.get_u64("height")?;
        let proof = SymbolProof::from_bytes(&r.get_bytes("proof")?)?;
        Ok(CommittedTxn { txn, height, proof })
    }
}

/// Proof that a block contains an invalid transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FraudProof {
    pub invalid: CommittedTxn,
    /// Present exactly when the fraud is a double spend: a past transaction
    /// from the same spender with at least one colliding input.
    pub past: Option<CommittedTxn>,
}

impl FraudProof {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.invalid.write_to(&mut w);
        match &self.past {
            None => w.put_u8(0),
            Some(p) => {
                w.put_u8(1);
                p.write_to(&mut w);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let invalid = CommittedTxn::read_from(&mut r)?;
        let past = match r.get_u8("past flag")? {
            0 => None,
            1 => Some(CommittedTxn::read_from(&mut r)?),
            _ => return Err(WireError::Malformed("past flag")),
        };
        r.expect_end()?;
        Ok(FraudProof { invalid, past })
    }

    pub fn byte_size(&self) -> usize {
        self.to_bytes().len()
    }
}

/// Fraud proof acceptance:
/// 1. both membership proofs verify (else false);
/// 2. the chain-only checks of the named transaction: any failure proves
///    invalidity (true);
/// 3. otherwise, a past transaction with intersecting inputs from an
///    earlier block (or an earlier position in the same block) proves a
///    double spend (true);
/// 4. otherwise false.
pub fn is_valid_fraud_proof(fp: &FraudProof, chain: &HeaderChain, params: &ChainParams) -> bool {
    if fp.invalid.height == 0 {
        return false; // the genesis block mints outside the transaction rules
    }
    if !fp.invalid.verify_inclusion(chain, params) {
        return false;
    }
    if let Some(past) = &fp.past {
        if !past.verify_inclusion(chain, params) {
            return false;
        }
    }
    match validate_txn_stateless(&fp.invalid.txn, fp.invalid.height, chain, params) {
        Ok(TxValidity::Valid) => {}
        Ok(TxValidity::Invalid { .. }) => return true,
        Err(LedgerError::InsufficientChain(_)) => return false,
        Err(_) => return false,
    }
    if let Some(past) = &fp.past {
        let earlier = past.height < fp.invalid.height
            || (past.height == fp.invalid.height && past.position() < fp.invalid.position());
        if earlier {
            let collide = fp
                .invalid
                .txn
                .inputs
                .iter()
                .any(|i| past.txn.inputs.contains(i));
            if collide {
                return true;
            }
        }
    }
    false
}

/// Proof that a block is not sorted by sender section: two committed
/// transactions with ordered positions but inverted sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortingFraudProof {
    pub first: CommittedTxn,
    pub second: CommittedTxn,
}

impl SortingFraudProof {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.first.write_to(&mut w);
        self.second.write_to(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let first = CommittedTxn::read_from(&mut r)?;
        let second = CommittedTxn::read_from(&mut r)?;
        r.expect_end()?;
        Ok(SortingFraudProof { first, second })
    }
}

pub fn verify_sorting_fraud_proof(
    sp: &SortingFraudProof,
    chain: &HeaderChain,
    params: &ChainParams,
) -> bool {
    if sp.first.height != sp.second.height {
        return false;
    }
    if !sp.first.verify_inclusion(chain, params) || !sp.second.verify_inclusion(chain, params) {
        return false;
    }
    sp.first.position() < sp.second.position()
        && section_of(&sp.first.txn.sender, params.k) > section_of(&sp.second.txn.sender, params.k)
}
