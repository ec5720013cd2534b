//! Byzantine validator strategies. Fake symbols and fake fraud proofs are
//! well-formed bytes that fail verification; hashes cannot be forged.

use crate::engine::{Ctx, NodeBehavior};
use crate::message::{Envelope, Payload};
use cover::cmt::{CmtContext, SymbolId, SymbolProof};
use cover::hash::Digest;
use cover::ledger::{AccountId, CommittedTxn, FraudProof, Transaction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

#[derive(Debug, Clone)]
pub enum ByzantineStrategy {
    /// Receives everything, says nothing.
    Silent,
    /// Relays like an honest node but drops symbols of one layer (all
    /// layers when None).
    DropSymbols { layer: Option<u16> },
    /// Emits symbols with invalid proofs at the given rate per tick.
    FakeSymbolSpam { per_tick: u32 },
    /// Emits fraud proofs that fail verification at the given rate per tick.
    FakeFraudSpam { per_tick: u32 },
}

pub struct ByzantineNode {
    strategy: ByzantineStrategy,
    ctx_info: Rc<CmtContext>,
    rng: ChaCha8Rng,
    /// Spam stops here so the event queue drains.
    until_tick: u64,
    // Relay state for DropSymbols.
    interests_sent: bool,
    neighbor_interests: BTreeMap<usize, BTreeSet<SymbolId>>,
    held: BTreeMap<SymbolId, Rc<Envelope>>,
    sent: BTreeSet<(usize, SymbolId)>,
    seen: BTreeSet<Digest>,
}

impl ByzantineNode {
    pub fn new(strategy: ByzantineStrategy, ctx_info: Rc<CmtContext>, seed: u64, until_tick: u64) -> Self {
        ByzantineNode {
            strategy,
            ctx_info,
            rng: ChaCha8Rng::seed_from_u64(seed),
            until_tick,
            interests_sent: false,
            neighbor_interests: BTreeMap::new(),
            held: BTreeMap::new(),
            sent: BTreeSet::new(),
            seen: BTreeSet::new(),
        }
    }

    fn random_symbol_id(&mut self) -> SymbolId {
        let layout = &self.ctx_info.layout;
        let layer = 1 + (self.rng.random::<u64>() % layout.depth() as u64) as u16;
        let index = (self.rng.random::<u64>() % layout.total_width(layer) as u64) as u32;
        SymbolId::new(layer, index)
    }

    fn fake_symbol(&mut self) -> Rc<Envelope> {
        let id = self.random_symbol_id();
        let size = self
            .ctx_info
            .layout
            .symbol_size(id.layer, self.ctx_info.params.symbol_size);
        let mut bytes = vec![0u8; size];
        self.rng.fill(&mut bytes[..]);
        // A structurally plausible proof with garbage digests.
        let mut ancestors = Vec::new();
        for _ in 1..id.layer {
            let mut a = vec![0u8; cover::cmt::UPPER_SYMBOL_SIZE];
            self.rng.fill(&mut a[..]);
            ancestors.push(a);
        }
        Envelope::new(Payload::Symbol {
            id,
            bytes,
            proof: SymbolProof {
                id,
                ancestors,
                top_others: vec![],
            },
        })
    }

    fn fake_fraud(&mut self) -> Rc<Envelope> {
        let mut sender = [0u8; 32];
        self.rng.fill(&mut sender);
        let mut sig = vec![0u8; 32];
        self.rng.fill(&mut sig[..]);
        let txn = Transaction {
            sender: AccountId(sender),
            signature: sig,
            outputs: vec![],
            inputs: vec![],
            input_proofs: vec![],
        };
        let id = self.random_symbol_id();
        Envelope::new(Payload::TxFraud(FraudProof {
            invalid: CommittedTxn {
                txn,
                height: self.rng.random::<u64>() % 8,
                proof: SymbolProof {
                    id,
                    ancestors: vec![],
                    top_others: vec![],
                },
            },
            past: None,
        }))
    }
}

impl NodeBehavior for ByzantineNode {
    fn on_start(&mut self, ctx: &mut Ctx) {
        if let ByzantineStrategy::DropSymbols { .. } = self.strategy {
            // Register interest in everything so symbols route through us.
            let all: BTreeSet<SymbolId> = (1..=self.ctx_info.depth())
                .flat_map(|l| {
                    (0..self.ctx_info.layout.total_width(l) as u32).map(move |i| SymbolId::new(l, i))
                })
                .collect();
            let env = Envelope::new(Payload::Interests {
                node: ctx.id,
                symbols: all,
            });
            ctx.broadcast(&env);
            self.interests_sent = true;
        }
    }

    fn on_message(&mut self, ctx: &mut Ctx, from: usize, msg: &Rc<Envelope>) {
        let ByzantineStrategy::DropSymbols { layer } = self.strategy else {
            return; // Silent and spammers ignore incoming traffic
        };
        match &msg.payload {
            Payload::Interests { symbols, .. } => {
                self.neighbor_interests.insert(from, symbols.clone());
            }
            Payload::Symbol { id, .. } => {
                if layer.is_none_or(|l| l == id.layer) {
                    return; // dropped
                }
                if self.held.contains_key(id) {
                    return;
                }
                self.held.insert(*id, msg.clone());
                let id = *id;
                let targets: Vec<usize> = self
                    .neighbor_interests
                    .iter()
                    .filter(|(to, wants)| wants.contains(&id) && !self.sent.contains(&(**to, id)))
                    .map(|(to, _)| *to)
                    .collect();
                for to in targets {
                    self.sent.insert((to, id));
                    ctx.send(to, msg.clone());
                }
            }
            _ => {
                if self.seen.insert(msg.key) {
                    ctx.broadcast(msg);
                }
            }
        }
    }

    fn on_tick_end(&mut self, ctx: &mut Ctx) {
        if ctx.now >= self.until_tick || ctx.neighbors().is_empty() {
            return;
        }
        let per_tick = match self.strategy {
            ByzantineStrategy::FakeSymbolSpam { per_tick } => per_tick,
            ByzantineStrategy::FakeFraudSpam { per_tick } => per_tick,
            _ => return,
        };
        for _ in 0..per_tick {
            let env = match self.strategy {
                ByzantineStrategy::FakeSymbolSpam { .. } => self.fake_symbol(),
                _ => self.fake_fraud(),
            };
            let to = ctx.neighbors()[self.rng.random_range(0..ctx.neighbors().len())];
            ctx.send(to, env);
        }
    }
}
