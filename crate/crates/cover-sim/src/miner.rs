//! Block production under scripted miner strategies, and the miner's
//! network behavior: publish the header, then serve published symbols to
//! whichever neighbors register interest in them.

use crate::engine::{Ctx, NodeBehavior};
use crate::message::{Envelope, Payload};
use cover::cmt::{build_tree, CmtContext, CmtError, SymbolId};
use cover::ledger::{transaction_base_symbols, Block, ChainParams, Header, LedgerError, Transaction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;
use thiserror::Error;

#[derive(Debug, Clone)]
pub enum MinerStrategy {
    /// Publish every symbol of an honestly built tree.
    Honest,
    /// Withhold a verified stopping set of one layer (plus the descendants
    /// of any hidden data symbol, whose proofs would reveal it).
    HideStoppingSet { layer: u16, set: BTreeSet<u32> },
    /// Mis-encode exactly one parity equation: XOR a delta into the coded
    /// symbols solving A_coded d = e_check, then recommit the layers above
    /// so every corrupted symbol keeps a valid path.
    CodingFraud { layer: u16, check: u32, delta: u8 },
    /// Replace the transaction at `position` with a prepared invalid one
    /// (any invalidity class; the replacement is crafted by the scenario).
    InvalidTxn {
        position: u32,
        replacement: Box<Transaction>,
    },
    /// Swap two adjacent transactions across a section boundary.
    UnsortedSwap { position: u32 },
    /// Withhold each symbol independently with the given probability.
    WithholdRandom { fraction: f64, seed: u64 },
}

impl MinerStrategy {
    pub fn label(&self) -> &'static str {
        match self {
            MinerStrategy::Honest => "honest",
            MinerStrategy::HideStoppingSet { .. } => "hide_stopping_set",
            MinerStrategy::CodingFraud { .. } => "coding_fraud",
            MinerStrategy::InvalidTxn { .. } => "invalid_txn",
            MinerStrategy::UnsortedSwap { .. } => "unsorted",
            MinerStrategy::WithholdRandom { .. } => "withhold_random",
        }
    }
}

#[derive(Debug, Error)]
pub enum ProduceError {
    #[error("ledger error: {0}")]
    Ledger(#[from] LedgerError),
    #[error("tree error: {0}")]
    Tree(#[from] CmtError),
    #[error("hidden set is not a stopping set")]
    NotAStoppingSet,
    #[error("strategy parameters out of range")]
    BadStrategy,
}

/// Everything a round needs about one produced block.
pub struct BlockBundle {
    pub header: Header,
    pub ctx: Rc<CmtContext>,
    pub block: Block,
    pub root: cover::hash::Digest,
    /// What the miner will serve: (id, bytes, proof).
    pub publication: Vec<(SymbolId, Vec<u8>, cover::cmt::SymbolProof)>,
    /// Symbols withheld from publication.
    pub hidden: BTreeSet<SymbolId>,
}

pub fn produce_block(
    strategy: &MinerStrategy,
    mut txs: Vec<Transaction>,
    prev: Option<&Header>,
    params: &ChainParams,
    height: u64,
) -> Result<BlockBundle, ProduceError> {
    match strategy {
        MinerStrategy::InvalidTxn { position, replacement } => {
            let p = *position as usize;
            if p >= txs.len() {
                return Err(ProduceError::BadStrategy);
            }
            txs[p] = (**replacement).clone();
        }
        MinerStrategy::UnsortedSwap { position } => {
            let p = *position as usize;
            if p + 1 >= txs.len() {
                return Err(ProduceError::BadStrategy);
            }
            txs.swap(p, p + 1);
        }
        _ => {}
    }

    let base = transaction_base_symbols(&txs, params.cmt.symbol_size)?;
    let ctx = Rc::new(CmtContext::new(params.cmt, txs.len())?);
    let mut tree = build_tree(&ctx, &base)?;

    if let MinerStrategy::CodingFraud { layer, check, delta } = strategy {
        let layer = *layer;
        if layer < 2 || layer > ctx.depth() {
            return Err(ProduceError::BadStrategy);
        }
        let pattern = ctx
            .code(layer)
            .single_check_corruption(*check)
            .ok_or(ProduceError::BadStrategy)?;
        tree.corrupt_and_recommit(&ctx, layer, &pattern, &[(*delta).max(1)]);
    }

    let mut hidden: BTreeSet<SymbolId> = BTreeSet::new();
    match strategy {
        MinerStrategy::HideStoppingSet { layer, set } => {
            if *layer < 2 || *layer > ctx.depth() {
                return Err(ProduceError::BadStrategy);
            }
            if !ctx.code(*layer).is_stopping_set(set) {
                return Err(ProduceError::NotAStoppingSet);
            }
            hidden = ctx.layout.withhold_closure(*layer, set);
        }
        MinerStrategy::WithholdRandom { fraction, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for id in tree.all_ids() {
                if rng.random::<f64>() < *fraction {
                    hidden.insert(id);
                }
            }
        }
        _ => {}
    }

    let header = Header {
        prev_hash: prev.map(|h| h.hash()).unwrap_or_default(),
        root: tree.root(),
        len: txs.len() as u64,
        height,
        other: vec![],
    };
    let publication = tree
        .all_ids()
        .filter(|id| !hidden.contains(id))
        .map(|id| {
            (
                id,
                tree.symbol(id).to_vec(),
                tree.symbol_proof(&ctx.layout, id),
            )
        })
        .collect();
    Ok(BlockBundle {
        root: tree.root(),
        block: Block {
            header: header.clone(),
            txs,
        },
        header,
        ctx,
        publication,
        hidden,
    })
}

/// The miner on the wire: sends the header at tick zero, then serves
/// published symbols to interested neighbors. It does not relay anything.
pub struct MinerNode {
    header_env: Rc<Envelope>,
    symbols: BTreeMap<SymbolId, Rc<Envelope>>,
    neighbor_interests: BTreeMap<usize, BTreeSet<SymbolId>>,
    sent: BTreeSet<(usize, SymbolId)>,
}

impl MinerNode {
    pub fn new(bundle: &BlockBundle) -> Self {
        let header_env = Envelope::new(Payload::Header(bundle.header.clone()));
        let symbols = bundle
            .publication
            .iter()
            .map(|(id, bytes, proof)| {
                (
                    *id,
                    Envelope::new(Payload::Symbol {
                        id: *id,
                        bytes: bytes.clone(),
                        proof: proof.clone(),
                    }),
                )
            })
            .collect();
        MinerNode {
            header_env,
            symbols,
            neighbor_interests: BTreeMap::new(),
            sent: BTreeSet::new(),
        }
    }

    fn serve(&mut self, ctx: &mut Ctx, to: usize) {
        let Some(wants) = self.neighbor_interests.get(&to) else {
            return;
        };
        let matching: Vec<(SymbolId, Rc<Envelope>)> = self
            .symbols
            .iter()
            .filter(|(id, _)| wants.contains(id) && !self.sent.contains(&(to, **id)))
            .map(|(id, env)| (*id, env.clone()))
            .collect();
        for (id, env) in matching {
            self.sent.insert((to, id));
            ctx.send(to, env);
        }
    }
}

impl NodeBehavior for MinerNode {
    fn on_start(&mut self, ctx: &mut Ctx) {
        ctx.broadcast(&self.header_env.clone());
    }

    fn on_message(&mut self, ctx: &mut Ctx, from: usize, msg: &Rc<Envelope>) {
        if let Payload::Interests { symbols, .. } = &msg.payload {
            self.neighbor_interests.insert(from, symbols.clone());
            self.serve(ctx, from);
        }
    }
}
