//! Deterministic discrete-event loop: integer ticks, seeded per-hop delays
//! in [1, delta], FIFO tie-break by send order. Identical inputs produce
//! byte-identical traces.

use crate::graph::NetworkGraph;
use crate::message::Envelope;
use std::collections::BTreeMap;
use std::rc::Rc;

#[derive(Debug, Clone, Copy)]
pub struct EngineConfig {
    /// Maximum per-hop delay; actual delays are drawn in [1, delta].
    pub delta: u64,
    /// Seed for delay draws.
    pub seed: u64,
    /// Hard stop; the run also ends when the event queue drains.
    pub max_ticks: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NodeCounters {
    pub msgs_in: u64,
    pub msgs_out: u64,
    pub bytes_in: u64,
    pub bytes_out: u64,
    /// Interest-exchange bytes, tracked apart from symbol traffic.
    pub interest_bytes_out: u64,
    pub interest_bytes_in: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub tick: u64,
    pub from: usize,
    pub to: usize,
    pub kind: &'static str,
    pub size: usize,
}

/// Newline-delimited records: tick, from, to, message type, size bytes.
pub fn export_trace(trace: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in trace {
        out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", e.tick, e.from, e.to, e.kind, e.size));
    }
    out
}

/// What a node can do during a callback: inspect time and topology, and
/// send to neighbors.
pub struct Ctx<'a> {
    pub now: u64,
    pub id: usize,
    neighbors: &'a [usize],
    outbox: Vec<(usize, Rc<Envelope>)>,
}

impl<'a> Ctx<'a> {
    pub fn neighbors(&self) -> &[usize] {
        self.neighbors
    }

    /// Queue a message; non-neighbor destinations are dropped.
    pub fn send(&mut self, to: usize, msg: Rc<Envelope>) {
        if self.neighbors.contains(&to) {
            self.outbox.push((to, msg));
        }
    }

    pub fn broadcast(&mut self, msg: &Rc<Envelope>) {
        for i in 0..self.neighbors.len() {
            self.outbox.push((self.neighbors[i], msg.clone()));
        }
    }
}

pub trait NodeBehavior {
    fn on_start(&mut self, ctx: &mut Ctx);
    fn on_message(&mut self, ctx: &mut Ctx, from: usize, msg: &Rc<Envelope>);
    fn on_tick_end(&mut self, _ctx: &mut Ctx) {}
    /// Called once when the run ends (deadline or quiescence).
    fn on_finish(&mut self, _now: u64) {}
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic per-hop delay in [1, delta].
fn hop_delay(seed: u64, from: usize, to: usize, key: u64, tick: u64, delta: u64) -> u64 {
    let mix = splitmix64(seed ^ splitmix64(from as u64) ^ splitmix64((to as u64) << 20) ^ key ^ splitmix64(tick));
    1 + mix % delta.max(1)
}

pub struct RunReport {
    pub trace: Vec<TraceEvent>,
    pub counters: Vec<NodeCounters>,
    pub ticks: u64,
}

pub fn run<B: NodeBehavior>(
    graph: &NetworkGraph,
    config: EngineConfig,
    nodes: &mut [B],
    record_trace: bool,
) -> RunReport {
    assert_eq!(nodes.len(), graph.n);
    let mut queue: BTreeMap<(u64, u64), (usize, usize, Rc<Envelope>)> = BTreeMap::new();
    let mut seq: u64 = 0;
    let mut counters = vec![NodeCounters::default(); graph.n];
    let mut trace = Vec::new();

    let schedule =
        |now: u64,
         from: usize,
         sends: Vec<(usize, Rc<Envelope>)>,
         queue: &mut BTreeMap<(u64, u64), (usize, usize, Rc<Envelope>)>,
         seq: &mut u64,
         counters: &mut [NodeCounters]| {
            for (to, msg) in sends {
                let key = u64::from_le_bytes(msg.key.0[..8].try_into().unwrap());
                let at = now + hop_delay(config.seed, from, to, key, now, config.delta);
                counters[from].msgs_out += 1;
                counters[from].bytes_out += msg.size as u64;
                if matches!(msg.payload, crate::message::Payload::Interests { .. }) {
                    counters[from].interest_bytes_out += msg.size as u64;
                }
                queue.insert((at, *seq), (from, to, msg));
                *seq += 1;
            }
        };

    // Tick 0: start hooks.
    #[allow(clippy::needless_range_loop)]
    for id in 0..graph.n {
        let mut ctx = Ctx {
            now: 0,
            id,
            neighbors: graph.neighbors(id),
            outbox: Vec::new(),
        };
        nodes[id].on_start(&mut ctx);
        let sends = ctx.outbox;
        schedule(0, id, sends, &mut queue, &mut seq, &mut counters);
    }

    let mut now = 0;
    while let Some((&(at, _), _)) = queue.first_key_value() {
        if at > config.max_ticks {
            break;
        }
        now = at;
        // Deliver everything scheduled for this tick, in send order.
        while let Some(entry) = queue.first_entry() {
            if entry.key().0 != now {
                break;
            }
            let (from, to, msg) = entry.remove();
            counters[to].msgs_in += 1;
            counters[to].bytes_in += msg.size as u64;
            if matches!(msg.payload, crate::message::Payload::Interests { .. }) {
                counters[to].interest_bytes_in += msg.size as u64;
            }
            if record_trace {
                trace.push(TraceEvent {
                    tick: now,
                    from,
                    to,
                    kind: msg.payload.kind(),
                    size: msg.size,
                });
            }
            let mut ctx = Ctx {
                now,
                id: to,
                neighbors: graph.neighbors(to),
                outbox: Vec::new(),
            };
            nodes[to].on_message(&mut ctx, from, &msg);
            let sends = ctx.outbox;
            schedule(now, to, sends, &mut queue, &mut seq, &mut counters);
        }
        // End-of-tick hooks in node-id order.
        #[allow(clippy::needless_range_loop)]
        for id in 0..graph.n {
            let mut ctx = Ctx {
                now,
                id,
                neighbors: graph.neighbors(id),
                outbox: Vec::new(),
            };
            nodes[id].on_tick_end(&mut ctx);
            let sends = ctx.outbox;
            schedule(now, id, sends, &mut queue, &mut seq, &mut counters);
        }
    }

    for node in nodes.iter_mut() {
        node.on_finish(now);
    }
    RunReport {
        trace,
        counters,
        ticks: now,
    }
}
