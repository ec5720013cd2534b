//! Deterministic network simulation for collaborative block verification:
//! seeded random topologies, a discrete-event message engine, gossip and
//! selective broadcast, the per-validator protocol state machine, and
//! scripted adversaries.

pub mod byzantine;
pub mod engine;
pub mod graph;
pub mod message;
pub mod miner;
pub mod relay;
pub mod round;
pub mod validator;

pub use engine::{export_trace, EngineConfig, NodeCounters, TraceEvent};
pub use graph::{generate_graph, interest_subgraph_connected, NetworkGraph};
pub use message::{Envelope, Payload};
