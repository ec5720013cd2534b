//! One protocol round end to end: the miner node publishes a block bundle
//! over the validator graph; validators decode, validate, exchange fraud
//! proofs, and settle verdicts by the deadline.

use crate::byzantine::{ByzantineNode, ByzantineStrategy};
use crate::engine::{self, Ctx, EngineConfig, NodeBehavior, NodeCounters, TraceEvent};
use crate::graph::NetworkGraph;
use crate::message::Envelope;
use crate::miner::{BlockBundle, MinerNode};
use crate::validator::{Decision, ValidatorNode, Verdict};
use cover::hash::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::rc::Rc;

#[derive(Debug, Clone, Copy)]
pub struct RoundSpec {
    pub delta: u64,
    pub deadline: u64,
    pub engine_seed: u64,
    pub record_trace: bool,
}

/// A stall window that upper-bounds propagation: delta * (nodes + 1).
pub fn default_t_stall(delta: u64, nodes: usize) -> u64 {
    delta * (nodes as u64 + 1)
}

enum SimNode {
    Validator(Box<ValidatorNode>),
    Miner(Box<MinerNode>),
    Byzantine(Box<ByzantineNode>),
}

impl NodeBehavior for SimNode {
    fn on_start(&mut self, ctx: &mut Ctx) {
        match self {
            SimNode::Validator(v) => v.on_start(ctx),
            SimNode::Miner(m) => m.on_start(ctx),
            SimNode::Byzantine(b) => b.on_start(ctx),
        }
    }

    fn on_message(&mut self, ctx: &mut Ctx, from: usize, msg: &Rc<Envelope>) {
        match self {
            SimNode::Validator(v) => v.on_message(ctx, from, msg),
            SimNode::Miner(m) => m.on_message(ctx, from, msg),
            SimNode::Byzantine(b) => b.on_message(ctx, from, msg),
        }
    }

    fn on_tick_end(&mut self, ctx: &mut Ctx) {
        match self {
            SimNode::Validator(v) => v.on_tick_end(ctx),
            SimNode::Miner(m) => m.on_tick_end(ctx),
            SimNode::Byzantine(b) => b.on_tick_end(ctx),
        }
    }

    fn on_finish(&mut self, now: u64) {
        match self {
            SimNode::Validator(v) => v.on_finish(now),
            SimNode::Miner(m) => m.on_finish(now),
            SimNode::Byzantine(b) => b.on_finish(now),
        }
    }
}

pub struct RoundReport {
    /// Per validator id; None for byzantine slots.
    pub verdicts: Vec<Option<Verdict>>,
    pub counters: Vec<NodeCounters>,
    pub trace: Vec<TraceEvent>,
    pub ticks: u64,
    pub miner_id: usize,
}

impl RoundReport {
    pub fn honest_verdicts(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().flatten()
    }

    pub fn unanimous_accept(&self) -> bool {
        self.honest_verdicts().all(|v| matches!(v.decision, Decision::Accept))
            && self.honest_verdicts().count() > 0
    }

    pub fn unanimous_reject(&self) -> bool {
        self.honest_verdicts().all(|v| !matches!(v.decision, Decision::Accept))
            && self.honest_verdicts().count() > 0
    }

    /// Tick by which every honest node had settled its verdict.
    pub fn ticks_to_unanimity(&self) -> u64 {
        self.honest_verdicts().map(|v| v.at_tick).max().unwrap_or(0)
    }
}

/// Sample the miner's peers: each validator independently with probability
/// p; never empty.
pub fn sample_miner_peers(n: usize, p: f64, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut peers: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < p).collect();
    if peers.is_empty() {
        peers.push((rng.random::<u64>() % n as u64) as usize);
    }
    peers
}

/// Run one round. `validators[i]` is consumed for honest graph nodes;
/// dishonest nodes run `byz` strategies (Silent when unspecified). Returns
/// the validators (with updated chain, table, and verdict history).
pub fn run_round(
    graph: &NetworkGraph,
    miner_peers: &[usize],
    bundle: &BlockBundle,
    validators: Vec<ValidatorNode>,
    byz: &BTreeMap<usize, ByzantineStrategy>,
    spec: RoundSpec,
) -> (Vec<ValidatorNode>, RoundReport) {
    assert_eq!(validators.len(), graph.n);
    let mut extended = graph.clone();
    let miner_id = extended.add_node(miner_peers);

    let mut nodes: Vec<SimNode> = Vec::with_capacity(extended.n);
    let mut parked: Vec<ValidatorNode> = Vec::new();
    for (i, v) in validators.into_iter().enumerate() {
        if graph.honest[i] && !byz.contains_key(&i) {
            nodes.push(SimNode::Validator(Box::new(v)));
        } else {
            let strategy = byz.get(&i).cloned().unwrap_or(ByzantineStrategy::Silent);
            nodes.push(SimNode::Byzantine(Box::new(ByzantineNode::new(
                strategy,
                bundle.ctx.clone(),
                derive_seed(spec.engine_seed, 0xB5 + i as u64),
                spec.deadline,
            ))));
            parked.push(v); // displaced validator, returned untouched
        }
    }
    nodes.push(SimNode::Miner(Box::new(MinerNode::new(bundle))));

    let config = EngineConfig {
        delta: spec.delta,
        seed: spec.engine_seed,
        max_ticks: spec.deadline,
    };
    let report = engine::run(&extended, config, &mut nodes, spec.record_trace);

    let mut parked = parked.into_iter();
    let mut out: Vec<ValidatorNode> = Vec::with_capacity(graph.n);
    let mut verdicts: Vec<Option<Verdict>> = Vec::with_capacity(graph.n);
    for node in nodes.into_iter().take(graph.n) {
        match node {
            SimNode::Validator(v) => {
                verdicts.push(v.last_verdict().cloned());
                out.push(*v);
            }
            SimNode::Byzantine(_) => {
                verdicts.push(None);
                out.push(parked.next().expect("one parked validator per byzantine slot"));
            }
            SimNode::Miner(_) => unreachable!("miner is the last node"),
        }
    }

    (
        out,
        RoundReport {
            verdicts,
            counters: report.counters,
            trace: report.trace,
            ticks: report.ticks,
            miner_id,
        },
    )
}
