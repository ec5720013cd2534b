//! The ledger data model: UTXO transactions carrying membership proofs for
//! the outputs that fund them, block headers committing to a coded Merkle
//! tree of transactions, and the spent-TXO table a validator keeps for its
//! section of the identity space.

mod fraud;
mod sig;

pub use fraud::{
    is_valid_fraud_proof, verify_sorting_fraud_proof, CommittedTxn, FraudProof, SortingFraudProof,
};
pub use sig::{section_of, verify_signature, AccountId, KeyPair, SigScheme};

use crate::cmt::{CmtParams, Layout, SymbolProof};
use crate::hash::{tagged_hash, Digest, TAG_HEADER, TAG_TXID};
use crate::wire::{Reader, WireError, Writer};
use std::collections::BTreeMap;
use thiserror::Error;

/// Hard cap on inputs and outputs per transaction.
pub const MAX_INPUTS: usize = 16;
pub const MAX_OUTPUTS: usize = 16;
/// Funding transactions embed their own funding proofs; bound the nesting
/// accepted off the wire.
const MAX_FUNDING_DEPTH: u32 = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("insufficient chain: missing header at height {0}")]
    InsufficientChain(u64),
    #[error("conflicting state: input already spent by a different transaction")]
    ConflictingState,
    #[error("decode failed: {0}")]
    Wire(#[from] WireError),
    #[error("transaction does not fit the configured symbol size")]
    TxTooLarge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxOutput {
    pub recipient: AccountId,
    pub amount: u64,
}

/// Reference to a past transaction output: the j-th output of `txid`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TxInputRef {
    pub txid: Digest,
    pub output_index: u16,
}

/// Evidence that an input's funding transaction is committed in the chain:
/// the block height, the full funding transaction bytes, and its symbol
/// proof against that block's root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputProof {
    pub height: u64,
    pub funding: Box<Transaction>,
    pub proof: SymbolProof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub sender: AccountId,
    pub signature: Vec<u8>,
    pub outputs: Vec<TxOutput>,
    pub inputs: Vec<TxInputRef>,
    pub input_proofs: Vec<InputProof>,
}

impl Transaction {
    /// The signed core: sender, outputs, inputs. Excludes the signature and
    /// the input proofs, so neither can malleate the id.
    pub fn core_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_raw(&self.sender.0);
        w.put_u16(self.outputs.len() as u16);
        for o in &self.outputs {
            w.put_raw(&o.recipient.0);
            w.put_u64(o.amount);
        }
        w.put_u16(self.inputs.len() as u16);
        for i in &self.inputs {
            w.put_digest(&i.txid);
            w.put_u16(i.output_index);
        }
        w.finish()
    }

    pub fn txid(&self) -> Digest {
        tagged_hash(TAG_TXID, &self.core_bytes())
    }

    pub fn sign_with(&mut self, key: &KeyPair) {
        self.signature = key.sign(&self.txid().0);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write_to(&mut w);
        w.finish()
    }

    fn write_to(&self, w: &mut Writer) {
        w.put_raw(&self.core_bytes());
        w.put_bytes(&self.signature);
        w.put_u16(self.input_proofs.len() as u16);
        for p in &self.input_proofs {
            w.put_u64(p.height);
            w.put_bytes(&p.funding.to_bytes());
            w.put_bytes(&p.proof.to_bytes());
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let tx = Self::read_from(&mut r, 0)?;
        r.expect_end()?;
        Ok(tx)
    }

    fn read_from(r: &mut Reader, depth: u32) -> Result<Self, WireError> {
        if depth > MAX_FUNDING_DEPTH {
            return Err(WireError::Malformed("funding nesting too deep"));
        }
        let mut sender = [0u8; 32];
        sender.copy_from_slice(&r.get_digest("sender")?.0);
        let n_out = r.get_u16("output count")? as usize;
        let mut outputs = Vec::with_capacity(n_out.min(1024));
        for _ in 0..n_out {
            let mut recipient = [0u8; 32];
            recipient.copy_from_slice(&r.get_digest("recipient")?.0);
            let amount = r.get_u64("amount")?;
            outputs.push(TxOutput {
                recipient: AccountId(recipient),
                amount,
            });
        }
        let n_in = r.get_u16("input count")? as usize;
        let mut inputs = Vec::with_capacity(n_in.min(1024));
        for _ in 0..n_in {
            let txid = r.get_digest("input txid")?;
            let output_index = r.get_u16("output index")?;
            inputs.push(TxInputRef { txid, output_index });
        }
        let signature = r.get_bytes("signature")?;
        let n_proofs = r.get_u16("proof count")? as usize;
        let mut input_proofs = Vec::with_capacity(n_proofs.min(1024));
        for _ in 0..n_proofs {
            let height = r.get_u64("funding height")?;
            let funding_bytes = r.get_bytes("funding tx")?;
            let mut fr = Reader::new(&funding_bytes);
            let funding = Transaction::read_from(&mut fr, depth + 1)?;
            fr.expect_end()?;
            let proof = SymbolProof::from_bytes(&r.get_bytes("funding proof")?)?;
            input_proofs.push(InputProof {
                height,
                funding: Box::new(funding),
                proof,
            });
        }
        Ok(Transaction {
            sender: AccountId(sender),
            signature,
            outputs,
            inputs,
            input_proofs,
        })
    }

    /// Parse a bottom-layer symbol: one transaction padded with zeros.
    pub fn from_padded_symbol(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let tx = Self::read_from(&mut r, 0)?;
        let mut rest = Vec::new();
        while r.remaining() > 0 {
            rest.push(r.get_u8("padding")?);
        }
        if rest.iter().any(|&b| b != 0) {
            return Err(WireError::Malformed("nonzero padding after transaction"));
        }
        Ok(tx)
    }

    pub fn output_sum(&self) -> Option<u64> {
        self.outputs.iter().try_fold(0u64, |acc, o| acc.checked_add(o.amount))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub prev_hash: Digest,
    /// Root commitment of the block's coded Merkle tree.
    pub root: Digest,
    /// Transaction count.
    pub len: u64,
    pub height: u64,
    pub other: Vec<u8>,
}

impl Header {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_digest(&self.prev_hash);
        w.put_digest(&self.root);
        w.put_u64(self.len);
        w.put_u64(self.height);
        w.put_bytes(&self.other);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let h = Header {
            prev_hash: r.get_digest("prev hash")?,
            root: r.get_digest("root")?,
            len: r.get_u64("len")?,
            height: r.get_u64("height")?,
            other: r.get_bytes("other")?,
        };
        r.expect_end()?;
        Ok(h)
    }

    pub fn hash(&self) -> Digest {
        tagged_hash(TAG_HEADER, &self.to_bytes())
    }

    /// Tree layout of the block this header commits to.
    pub fn layout(&self, params: &CmtParams) -> Layout {
        Layout::for_base(self.len.max(1) as usize, params.root_width)
    }
}

/// A contiguous header chain starting at height 0.
#[derive(Debug, Clone, Default)]
pub struct HeaderChain {
    headers: Vec<Header>,
}

impl HeaderChain {
    pub fn new() -> Self {
        HeaderChain { headers: Vec::new() }
    }

    /// Append a header; it must extend the tip.
    pub fn push(&mut self, header: Header) -> bool {
        let expected_height = self.headers.len() as u64;
        if header.height != expected_height {
            return false;
        }
        if let Some(tip) = self.headers.last() {
            if header.prev_hash != tip.hash() {
                return false;
            }
        }
        self.headers.push(header);
        true
    }

    pub fn get(&self, height: u64) -> Option<&Header> {
        self.headers.get(height as usize)
    }

    pub fn tip(&self) -> Option<&Header> {
        self.headers.last()
    }

    pub fn len(&self) -> u64 {
        self.headers.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.headers.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub header: Header,
    pub txs: Vec<Transaction>,
}

impl Block {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_bytes(&self.header.to_bytes());
        w.put_u32(self.txs.len() as u32);
        for tx in &self.txs {
            w.put_bytes(&tx.to_bytes());
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let header = Header::from_bytes(&r.get_bytes("header")?)?;
        let count = r.get_u32("tx count")? as usize;
        let mut txs = Vec::with_capacity(count.min(65536));
        for _ in 0..count {
            txs.push(Transaction::from_bytes(&r.get_bytes("tx")?)?);
        }
        r.expect_end()?;
        Ok(Block { header, txs })
    }
}

/// A spent entry: who spent the TXO, the spender's membership proof, and
/// the height it was spent at (for expiry pruning).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpentEntry {
    pub spender: Transaction,
    pub proof: SymbolProof,
    pub height: u64,
}

/// Map from spent TXO to the transaction that spent it.
#[derive(Debug, Clone, Default)]
pub struct SpentTxoTable {
    map: BTreeMap<(Digest, u16), SpentEntry>,
}

impl SpentTxoTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lookup(&self, txid: &Digest, output_index: u16) -> Option<&SpentEntry> {
        self.map.get(&(*txid, output_index))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Record every input of a validated transaction as spent. Idempotent
    /// for identical entries; a different spender for an already-present
    /// input is a caller bug (validation must precede).
    pub fn update_state(
        &mut self,
        txn: &Transaction,
        proof: &SymbolProof,
        height: u64,
    ) -> Result<usize, LedgerError> {
        let txid = txn.txid();
        let mut inserted = 0;
        for input in &txn.inputs {
            let key = (input.txid, input.output_index);
            match self.map.get(&key) {
                Some(existing) => {
                    if existing.spender.txid() != txid {
                        return Err(LedgerError::ConflictingState);
                    }
                }
                None => {
                    self.map.insert(
                        key,
                        SpentEntry {
                            spender: txn.clone(),
                            proof: proof.clone(),
                            height,
                        },
                    );
                    inserted += 1;
                }
            }
        }
        Ok(inserted)
    }

    /// Remove entries spent strictly before `current_height - tau`.
    /// Returns how many were removed. `tau = u64::MAX` disables expiry.
    pub fn prune_expired(&mut self, current_height: u64, tau: u64) -> usize {
        if tau == u64::MAX {
            return 0;
        }
        let cutoff = current_height.saturating_sub(tau);
        let before = self.map.len();
        self.map.retain(|_, e| e.height >= cutoff);
        before - self.map.len()
    }
}

/// Chain-level validation parameters.
#[derive(Debug, Clone)]
pub struct ChainParams {
    pub scheme: SigScheme,
    pub cmt: CmtParams,
    /// Number of account sections.
    pub k: u32,
    /// Expiry window in blocks; `u64::MAX` disables expiry.
    pub tau: u64,
}

impl Default for ChainParams {
    fn default() -> Self {
        ChainParams {
            scheme: SigScheme::Mock,
            cmt: CmtParams::default(),
            k: 1,
            tau: u64::MAX,
        }
    }
}

/// Why a transaction is invalid. The first three classes are checkable from
/// the header chain alone; a double spend needs the past spender.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvalidClass {
    BadSignature,
    BadSums,
    BadInputProof,
    Expired,
    DoubleSpend,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TxValidity {
    Valid,
    Invalid {
        class: InvalidClass,
        /// The conflicting past spend, for double-spend fraud proofs.
        past: Option<SpentEntry>,
    },
}

impl TxValidity {
    pub fn is_valid(&self) -> bool {
        matches!(self, TxValidity::Valid)
    }
}

/// The chain-only checks: signature, sums and ownership, input proofs and
/// expiry. Does not consult any spent table.
pub fn validate_txn_stateless(
    txn: &Transaction,
    height: u64,
    chain: &HeaderChain,
    params: &ChainParams,
) -> Result<TxValidity, LedgerError> {
    // 1: signature over the transaction id.
    if !verify_signature(params.scheme, &txn.sender, &txn.txid().0, &txn.signature) {
        return Ok(invalid(InvalidClass::BadSignature));
    }

    // 2: structural caps, input ownership, and value balance.
    if txn.inputs.is_empty()
        || txn.inputs.len() > MAX_INPUTS
        || txn.outputs.is_empty()
        || txn.outputs.len() > MAX_OUTPUTS
    {
        return Ok(invalid(InvalidClass::BadSums));
    }
    if txn.input_proofs.len() != txn.inputs.len() {
        return Ok(invalid(InvalidClass::BadInputProof));
    }
    let mut input_sum: u64 = 0;
    for (input, ip) in txn.inputs.iter().zip(&txn.input_proofs) {
        let out = match ip.funding.outputs.get(input.output_index as usize) {
            Some(out) => out,
            None => return Ok(invalid(InvalidClass::BadInputProof)),
        };
        if out.recipient != txn.sender {
            return Ok(invalid(InvalidClass::BadSums));
        }
        input_sum = match input_sum.checked_add(out.amount) {
            Some(s) => s,
            None => return Ok(invalid(InvalidClass::BadSums)),
        };
    }
    match txn.output_sum() {
        Some(s) if s == input_sum => {}
        _ => return Ok(invalid(InvalidClass::BadSums)),
    }

    // 3: funding proofs against historical roots, then expiry arithmetic.
    for (input, ip) in txn.inputs.iter().zip(&txn.input_proofs) {
        if ip.height >= height {
            return Ok(invalid(InvalidClass::BadInputProof));
        }
        let header = chain
            .get(ip.height)
            .ok_or(LedgerError::InsufficientChain(ip.height))?;
        if ip.funding.txid() != input.txid {
            return Ok(invalid(InvalidClass::BadInputProof));
        }
        let layout = header.layout(&params.cmt);
        let id = ip.proof.id;
        if id.layer != layout.bottom() || id.index as u64 >= header.len {
            return Ok(invalid(InvalidClass::BadInputProof));
        }
        let mut padded = ip.funding.to_bytes();
        if padded.len() > params.cmt.symbol_size {
            return Ok(invalid(InvalidClass::BadInputProof));
        }
        padded.resize(params.cmt.symbol_size, 0);
        if !ip.proof.verify(&header.root, &layout, &padded) {
            return Ok(invalid(InvalidClass::BadInputProof));
        }
        if tx_expired(height, ip.height, params.tau) {
            return Ok(invalid(InvalidClass::Expired));
        }
    }
    Ok(TxValidity::Valid)
}

/// An output mined at `funded_height` can be spent up to tau blocks later.
pub fn tx_expired(spend_height: u64, funded_height: u64, tau: u64) -> bool {
    tau != u64::MAX && spend_height.saturating_sub(funded_height) > tau
}

/// Full validation: the chain-only checks plus the double-payment check
/// against the spent-TXO table.
pub fn is_valid_txn(
    txn: &Transaction,
    height: u64,
    chain: &HeaderChain,
    spent: &SpentTxoTable,
    params: &ChainParams,
) -> Result<TxValidity, LedgerError> {
    match validate_txn_stateless(txn, height, chain, params)? {
        TxValidity::Valid => {}
        inv => return Ok(inv),
    }
    // 4: double payment.
    for input in &txn.inputs {
        if let Some(entry) = spent.lookup(&input.txid, input.output_index) {
            return Ok(TxValidity::Invalid {
                class: InvalidClass::DoubleSpend,
                past: Some(entry.clone()),
            });
        }
    }
    Ok(TxValidity::Valid)
}

fn invalid(class: InvalidClass) -> TxValidity {
    TxValidity::Invalid { class, past: None }
}

/// Serialize transactions into the base symbols of a block's tree.
/// Fails if any transaction exceeds the symbol size.
pub fn transaction_base_symbols(txs: &[Transaction], symbol_size: usize) -> Result<Vec<Vec<u8>>, LedgerError> {
    txs.iter()
        .map(|tx| {
            let bytes = tx.to_bytes();
            if bytes.len() > symbol_size {
                Err(LedgerError::TxTooLarge)
            } else {
                Ok(bytes)
            }
        })
        .collect()
}

/// Sorting check over a window of (position, transaction) pairs sorted by
/// position: the block must be ordered by sender section. Returns the first
/// adjacent pair whose sections are inverted.
pub fn check_sorted(window: &[(u32, &Transaction)], k: u32) -> Result<(), (usize, usize)> {
    for i in 1..window.len() {
        debug_assert!(window[i - 1].0 < window[i].0);
        let a = section_of(&window[i - 1].1.sender, k);
        let b = section_of(&window[i].1.sender, k);
        if a > b {
            return Err((i - 1, i));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mint(key: &KeyPair, amounts: &[(AccountId, u64)]) -> Transaction {
        let mut tx = Transaction {
            sender: key.account,
            signature: vec![],
            outputs: amounts
                .iter()
                .map(|(recipient, amount)| TxOutput {
                    recipient: *recipient,
                    amount: *amount,
                })
                .collect(),
            inputs: vec![],
            input_proofs: vec![],
        };
        tx.sign_with(key);
        tx
    }

    #[test]
    fn txid_excludes_signature_and_proofs() {
        let key = KeyPair::generate(SigScheme::Mock, 1, 1);
        let other = KeyPair::generate(SigScheme::Mock, 1, 2);
        let mut a = mint(&key, &[(other.account, 5)]);
        let before = a.txid();
        a.signature = vec![9; 32];
        assert_eq!(a.txid(), before);
    }

    #[test]
    fn transaction_wire_round_trip() {
        let key = KeyPair::generate(SigScheme::Mock, 1, 1);
        let other = KeyPair::generate(SigScheme::Mock, 1, 2);
        let tx = mint(&key, &[(other.account, 5), (key.account, 7)]);
        let decoded = Transaction::from_bytes(&tx.to_bytes()).unwrap();
        assert_eq!(decoded, tx);
    }

    #[test]
    fn padded_symbol_rejects_nonzero_padding() {
        let key = KeyPair::generate(SigScheme::Mock, 1, 1);
        let tx = mint(&key, &[(key.account, 5)]);
        let mut padded = tx.to_bytes();
        let len = padded.len();
        padded.resize(len + 32, 0);
        assert_eq!(Transaction::from_padded_symbol(&padded).unwrap(), tx);
        padded[len + 3] = 1;
        assert!(Transaction::from_padded_symbol(&padded).is_err());
    }

    #[test]
    fn header_chain_enforces_linkage() {
        let mut chain = HeaderChain::new();
        let genesis = Header {
            prev_hash: Digest::default(),
            root: Digest::default(),
            len: 1,
            height: 0,
            other: vec![],
        };
        assert!(chain.push(genesis.clone()));
        let good = Header {
            prev_hash: genesis.hash(),
            root: Digest::default(),
            len: 1,
            height: 1,
            other: vec![],
        };
        let mut bad = good.clone();
        bad.prev_hash = Digest([9; 32]);
        assert!(!chain.push(bad));
        assert!(chain.push(good));
        assert_eq!(chain.len(), 2);
    }

    #[test]
    fn table_update_is_idempotent_and_detects_conflicts() {
        let key = KeyPair::generate(SigScheme::Mock, 1, 1);
        let spend = |salt: u64| {
            let mut tx = Transaction {
                sender: key.account,
                signature: vec![],
                outputs: vec![TxOutput {
                    recipient: key.account,
                    amount: salt,
                }],
                inputs: vec![
                    TxInputRef {
                        txid: Digest([1; 32]),
                        output_index: 0,
                    },
                    TxInputRef {
                        txid: Digest([1; 32]),
                        output_index: 1,
                    },
                ],
                input_proofs: vec![],
            };
            tx.sign_with(&key);
            tx
        };
        let proof = SymbolProof {
            id: crate::cmt::SymbolId::new(1, 0),
            ancestors: vec![],
            top_others: vec![],
        };
        let mut table = SpentTxoTable::new();
        let tx = spend(1);
        assert_eq!(table.update_state(&tx, &proof, 5).unwrap(), 2);
        assert_eq!(table.update_state(&tx, &proof, 5).unwrap(), 0);
        assert_eq!(table.len(), 2);
        let conflicting = spend(2);
        assert_eq!(
            table.update_state(&conflicting, &proof, 6).unwrap_err(),
            LedgerError::ConflictingState
        );
    }

    #[test]
    fn prune_expired_boundary() {
        let key = KeyPair::generate(SigScheme::Mock, 1, 1);
        let proof = SymbolProof {
            id: crate::cmt::SymbolId::new(1, 0),
            ancestors: vec![],
            top_others: vec![],
        };
        let mut table = SpentTxoTable::new();
        for h in 1..=10u64 {
            let mut tx = Transaction {
                sender: key.account,
                signature: vec![],
                outputs: vec![TxOutput {
                    recipient: key.account,
                    amount: 1,
                }],
                inputs: vec![TxInputRef {
                    txid: Digest([h as u8; 32]),
                    output_index: 0,
                }],
                input_proofs: vec![],
            };
            tx.sign_with(&key);
            table.update_state(&tx, &proof, h).unwrap();
        }
        assert_eq!(table.prune_expired(12, u64::MAX), 0);
        // entries with height < 12 - 5 = 7 go away: heights 1..=6
        assert_eq!(table.prune_expired(12, 5), 6);
        assert_eq!(table.len(), 4);
    }

    #[test]
    fn expiry_arithmetic() {
        assert!(!tx_expired(10, 8, 5));
        assert!(!tx_expired(13, 8, 5));
        assert!(tx_expired(14, 8, 5));
        assert!(!tx_expired(14, 8, u64::MAX));
    }

    #[test]
    fn sorted_window_check() {
        let k = 4;
        let keys: Vec<KeyPair> = (0..4)
            .map(|s| KeyPair::generate_in_section(SigScheme::Mock, k, s, 1, s as u64))
            .collect();
        let mk = |key: &KeyPair| {
            let mut tx = Transaction {
                sender: key.account,
                signature: vec![],
                outputs: vec![TxOutput {
                    recipient: key.account,
                    amount: 1,
                }],
                inputs: vec![],
                input_proofs: vec![],
            };
            tx.sign_with(key);
            tx
        };
        let txs: Vec<Transaction> = keys.iter().map(mk).collect();
        let sorted: Vec<(u32, &Transaction)> = txs.iter().enumerate().map(|(i, t)| (i as u32, t)).collect();
        assert!(check_sorted(&sorted, k).is_ok());
        assert!(check_sorted(&sorted[..1], k).is_ok());
        let swapped: Vec<(u32, &Transaction)> = vec![
            (0, &txs[0]),
            (1, &txs[2]),
            (2, &txs[1]),
            (3, &txs[3]),
        ];
        assert_eq!(check_sorted(&swapped, k), Err((1, 2)));
    }
}
