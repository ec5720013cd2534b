//! Typed network payloads with canonical bytes for de-duplication and size
//! accounting.

use cover::cmt::{CodingFraudProof, SymbolId, SymbolProof};
use cover::hash::{tagged_hash, Digest, TAG_MESSAGE};
use cover::ledger::{FraudProof, Header, SortingFraudProof};
use cover::wire::Writer;
use std::collections::BTreeSet;
use std::rc::Rc;

#[derive(Debug, Clone)]
pub enum Payload {
    Header(Header),
    Symbol {
        id: SymbolId,
        bytes: Vec<u8>,
        proof: SymbolProof,
    },
    Interests {
        node: usize,
        symbols: BTreeSet<SymbolId>,
    },
    TxFraud(FraudProof),
    SortFraud(SortingFraudProof),
    CodingFraud(CodingFraudProof),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Header(_) => "header",
            Payload::Symbol { .. } => "symbol",
            Payload::Interests { .. } => "interests",
            Payload::TxFraud(_) => "tx_fraud",
            Payload::SortFraud(_) => "sort_fraud",
            Payload::CodingFraud(_) => "coding_fraud",
        }
    }

    /// Canonical wire bytes; the symbol wire format is
    /// (layer, index, payload, path proof).
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            Payload::Header(h) => {
                w.put_u8(0);
                w.put_bytes(&h.to_bytes());
            }
            Payload::Symbol { id, bytes, proof } => {
                w.put_u8(1);
                w.put_u16(id.layer);
                w.put_u32(id.index);
                w.put_bytes(bytes);
                w.put_bytes(&proof.to_bytes());
            }
            Payload::Interests { node, symbols } => {
                w.put_u8(2);
                w.put_u32(*node as u32);
                w.put_u32(symbols.len() as u32);
                for s in symbols {
                    w.put_u16(s.layer);
                    w.put_u32(s.index);
                }
            }
            Payload::TxFraud(fp) => {
                w.put_u8(3);
                w.put_bytes(&fp.to_bytes());
            }
            Payload::SortFraud(sp) => {
                w.put_u8(4);
                w.put_bytes(&sp.to_bytes());
            }
            Payload::CodingFraud(cp) => {
                w.put_u8(5);
                w.put_bytes(&cp.to_bytes());
            }
        }
        w.finish()
    }
}

/// A payload with its size and de-duplication key computed once.
#[derive(Debug)]
pub struct Envelope {
    pub payload: Payload,
    pub key: Digest,
    pub size: usize,
}

impl Envelope {
    pub fn new(payload: Payload) -> Rc<Envelope> {
        let bytes = payload.canonical_bytes();
        Rc::new(Envelope {
            key: tagged_hash(TAG_MESSAGE, &bytes),
            size: bytes.len(),
            payload,
        })
    }
}
