//! Plain relay behaviors backing the two broadcast primitives:
//! classic gossip (flood with seen-set suppression and a validation
//! callback) and selective broadcast (symbols only travel between nodes
//! interested in them).

use crate::engine::{self, Ctx, EngineConfig, NodeBehavior, RunReport};
use crate::graph::NetworkGraph;
use crate::message::{Envelope, Payload};
use cover::cmt::SymbolId;
use cover::hash::Digest;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

pub type ValidateFn = Rc<dyn Fn(&Payload) -> bool>;

/// A node that only relays. Dishonest-silent nodes receive and say nothing.
pub struct RelayNode {
    pub silent: bool,
    validate: ValidateFn,
    interests: BTreeSet<SymbolId>,
    /// Symbols held from the start (publications).
    publications: Vec<Rc<Envelope>>,
    /// Gossip payloads to emit at start.
    initial_gossip: Vec<Rc<Envelope>>,
    neighbor_interests: BTreeMap<usize, BTreeSet<SymbolId>>,
    seen: BTreeSet<Digest>,
    held: BTreeMap<SymbolId, Rc<Envelope>>,
    sent: BTreeSet<(usize, SymbolId)>,
    /// First receipt tick per gossip key / per symbol.
    pub first_receipt: BTreeMap<Digest, u64>,
    pub symbol_receipt: BTreeMap<SymbolId, u64>,
}

impl RelayNode {
    pub fn new(validate: ValidateFn) -> Self {
        RelayNode {
            silent: false,
            validate,
            interests: BTreeSet::new(),
            publications: Vec::new(),
            initial_gossip: Vec::new(),
            neighbor_interests: BTreeMap::new(),
            seen: BTreeSet::new(),
            held: BTreeMap::new(),
            sent: BTreeSet::new(),
            first_receipt: BTreeMap::new(),
            symbol_receipt: BTreeMap::new(),
        }
    }

    pub fn with_interests(mut self, interests: BTreeSet<SymbolId>) -> Self {
        self.interests = interests;
        self
    }

    pub fn with_publication(mut self, symbols: Vec<(SymbolId, Vec<u8>)>) -> Self {
        for (id, bytes) in symbols {
            let env = Envelope::new(Payload::Symbol {
                id,
                bytes,
                proof: cover::cmt::SymbolProof {
                    id,
                    ancestors: vec![],
                    top_others: vec![],
                },
            });
            self.symbol_receipt.insert(id, 0);
            self.held.insert(id, env.clone());
            self.publications.push(env);
        }
        self
    }

    pub fn with_initial_gossip(mut self, msgs: Vec<Rc<Envelope>>) -> Self {
        self.initial_gossip = msgs;
        self
    }

    fn offer_held(&mut self, ctx: &mut Ctx, to: usize) {
        let Some(wants) = self.neighbor_interests.get(&to) else {
            return;
        };
        let matching: Vec<(SymbolId, Rc<Envelope>)> = self
            .held
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

impl NodeBehavior for RelayNode {
    fn on_start(&mut self, ctx: &mut Ctx) {
        if self.silent {
            return;
        }
        let interests = Envelope::new(Payload::Interests {
            node: ctx.id,
            symbols: self.interests.clone(),
        });
        ctx.broadcast(&interests);
        for msg in self.initial_gossip.clone() {
            self.seen.insert(msg.key);
            self.first_receipt.insert(msg.key, 0);
            ctx.broadcast(&msg);
        }
        // Publications flow once neighbors register interest.
    }

    fn on_message(&mut self, ctx: &mut Ctx, from: usize, msg: &Rc<Envelope>) {
        if self.silent {
            return;
        }
        match &msg.payload {
            Payload::Interests { node, symbols } => {
                debug_assert_eq!(*node, from);
                self.neighbor_interests.insert(from, symbols.clone());
                self.offer_held(ctx, from);
            }
            Payload::Symbol { id, .. } => {
                if !self.interests.contains(id) || self.held.contains_key(id) {
                    return;
                }
                if !(self.validate)(&msg.payload) {
                    return;
                }
                self.symbol_receipt.insert(*id, ctx.now);
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
                // Classic gossip: forward valid unseen messages to everyone.
                if self.seen.contains(&msg.key) {
                    return;
                }
                if !(self.validate)(&msg.payload) {
                    return;
                }
                self.seen.insert(msg.key);
                self.first_receipt.insert(msg.key, ctx.now);
                ctx.broadcast(msg);
            }
        }
    }
}

pub struct GossipRun {
    pub report: RunReport,
    /// Tick of first receipt per node; None if never received.
    pub receipt: Vec<Option<u64>>,
}

/// Flood `payload` from `origin`; honest nodes forward iff `validate`
/// accepts and the message is unseen. `silent` nodes drop everything.
pub fn gossip(
    graph: &NetworkGraph,
    origin: usize,
    payload: Payload,
    validate: ValidateFn,
    delta: u64,
    seed: u64,
    silent: &BTreeSet<usize>,
) -> GossipRun {
    let env = Envelope::new(payload);
    let key = env.key;
    let mut nodes: Vec<RelayNode> = (0..graph.n)
        .map(|i| {
            let mut n = RelayNode::new(validate.clone());
            n.silent = silent.contains(&i) || !graph.honest[i];
            if i == origin {
                n = n.with_initial_gossip(vec![env.clone()]);
            }
            n
        })
        .collect();
    let config = EngineConfig {
        delta,
        seed,
        max_ticks: u64::MAX,
    };
    let report = engine::run(graph, config, &mut nodes, true);
    let receipt = nodes.iter().map(|n| n.first_receipt.get(&key).copied()).collect();
    GossipRun { report, receipt }
}

pub struct SelectiveRun {
    pub report: RunReport,
    /// delivered[node] = symbols that node ended up holding, with ticks.
    pub delivered: Vec<BTreeMap<SymbolId, u64>>,
}

/// One selective-broadcast round: interests are exchanged first, then each
/// publication travels only between nodes interested in it.
pub fn selective_broadcast_round(
    graph: &NetworkGraph,
    interests: &[BTreeSet<SymbolId>],
    publications: &[(usize, SymbolId, Vec<u8>)],
    delta: u64,
    seed: u64,
    silent: &BTreeSet<usize>,
) -> SelectiveRun {
    assert_eq!(interests.len(), graph.n);
    let always: ValidateFn = Rc::new(|_| true);
    let mut nodes: Vec<RelayNode> = (0..graph.n)
        .map(|i| {
            let mut n = RelayNode::new(always.clone()).with_interests(interests[i].clone());
            n.silent = silent.contains(&i) || !graph.honest[i];
            let pubs: Vec<(SymbolId, Vec<u8>)> = publications
                .iter()
                .filter(|(node, _, _)| *node == i)
                .map(|(_, id, bytes)| (*id, bytes.clone()))
                .collect();
            if !pubs.is_empty() {
                n = n.with_publication(pubs);
            }
            n
        })
        .collect();
    let config = EngineConfig {
        delta,
        seed,
        max_ticks: u64::MAX,
    };
    let report = engine::run(graph, config, &mut nodes, true);
    let delivered = nodes.into_iter().map(|n| n.symbol_receipt).collect();
    SelectiveRun { report, delivered }
}
