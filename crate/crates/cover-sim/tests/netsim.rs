//! Broadcast-layer behavior: flood bounds, validation gating, selective
//! delivery against the exact connectivity oracle, determinism, and the
//! delay bound.

use cover::cmt::SymbolId;
use cover::ledger::Header;
use cover_sim::graph::{generate_graph, interest_subgraph_connected, NetworkGraph};
use cover_sim::relay::{gossip, selective_broadcast_round};
use cover_sim::{export_trace, Payload};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::rc::Rc;

fn line_graph(n: usize) -> NetworkGraph {
    let mut g = generate_graph(n, 0.0, 1, 0.0, 0);
    for i in 0..n - 1 {
        g.adj[i].push(i + 1);
        g.adj[i + 1].push(i);
    }
    for a in &mut g.adj {
        a.sort_unstable();
    }
    g
}

fn test_header(tag: u8) -> Payload {
    Payload::Header(Header {
        prev_hash: cover::hash::Digest([tag; 32]),
        root: cover::hash::Digest::default(),
        len: 1,
        height: 0,
        other: vec![],
    })
}

#[test]
fn gossip_reaches_every_honest_node_within_delta_times_diameter() {
    let delta = 2u64;
    let n = 12;
    let g = line_graph(n); // diameter n-1
    let run = gossip(&g, 0, test_header(1), Rc::new(|_| true), delta, 7, &BTreeSet::new());
    for (i, receipt) in run.receipt.iter().enumerate() {
        let t = receipt.unwrap_or_else(|| panic!("node {i} never received"));
        assert!(t <= delta * (n as u64 - 1), "node {i} at {t}");
    }
}

#[test]
fn invalid_message_is_not_forwarded() {
    let g = generate_graph(8, 1.0, 3, 0.0, 0);
    let run = gossip(&g, 2, test_header(2), Rc::new(|_| false), 2, 7, &BTreeSet::new());
    // Only the origin's direct neighbors hear it; nobody forwards.
    for (i, receipt) in run.receipt.iter().enumerate() {
        if i == 2 {
            assert_eq!(*receipt, Some(0));
        }
        // Neighbors receive the bytes but record no acceptance; the relay
        // refuses the message, so first_receipt stays empty.
        if i != 2 {
            assert!(receipt.is_none(), "node {i} accepted an invalid message");
        }
    }
}

#[test]
fn silent_cut_vertex_partitions_gossip() {
    // A - B - C with B dishonest-silent: C never hears from A.
    let g = line_graph(3);
    let silent: BTreeSet<usize> = [1usize].into_iter().collect();
    let run = gossip(&g, 0, test_header(3), Rc::new(|_| true), 2, 7, &silent);
    assert!(run.receipt[0].is_some());
    assert!(run.receipt[2].is_none());
}

#[test]
fn selective_broadcast_with_universal_interest_degenerates_to_gossip() {
    let g = generate_graph(10, 0.4, 11, 0.0, 0);
    let symbols: Vec<SymbolId> = (0..6).map(|i| SymbolId::new(1, i)).collect();
    let all: BTreeSet<SymbolId> = symbols.iter().copied().collect();
    let interests: Vec<BTreeSet<SymbolId>> = (0..g.n).map(|_| all.clone()).collect();
    let pubs: Vec<(usize, SymbolId, Vec<u8>)> = symbols
        .iter()
        .enumerate()
        .map(|(i, s)| (i % g.n, *s, vec![i as u8; 16]))
        .collect();
    let run = selective_broadcast_round(&g, &interests, &pubs, 2, 5, &BTreeSet::new());
    for s in &symbols {
        let connected = interest_subgraph_connected(&g, &interests, *s);
        #[allow(clippy::needless_range_loop)]
        for node in 0..g.n {
            assert_eq!(
                run.delivered[node].contains_key(s),
                connected,
                "symbol {s} node {node}"
            );
        }
    }
}

#[test]
fn disconnected_interest_subgraph_blocks_delivery() {
    // Line A - B - C; only A and C want s: neither endpoint ever gets the
    // other's publication.
    let g = line_graph(3);
    let s = SymbolId::new(2, 0);
    let mut interests = vec![BTreeSet::new(); 3];
    interests[0].insert(s);
    interests[2].insert(s);
    let pubs = vec![(0usize, s, vec![9u8; 8])];
    let run = selective_broadcast_round(&g, &interests, &pubs, 2, 9, &BTreeSet::new());
    assert!(run.delivered[0].contains_key(&s)); // publisher holds it
    assert!(!run.delivered[2].contains_key(&s));
}

#[test]
fn complete_graph_delivers_within_two_delta() {
    let delta = 2u64;
    let g = generate_graph(8, 1.0, 2, 0.0, 0);
    let s = SymbolId::new(3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let interests: Vec<BTreeSet<SymbolId>> = (0..g.n)
        .map(|_| {
            if rng.random::<f64>() < 0.5 {
                [s].into_iter().collect()
            } else {
                BTreeSet::new()
            }
        })
        .collect();
    let publisher = (0..g.n).find(|&i| interests[i].contains(&s));
    let Some(publisher) = publisher else { return };
    let pubs = vec![(publisher, s, vec![1u8; 8])];
    let run = selective_broadcast_round(&g, &interests, &pubs, delta, 8, &BTreeSet::new());
    for (node, wants) in interests.iter().enumerate() {
        if wants.contains(&s) && node != publisher {
            let t = run.delivered[node][&s];
            assert!(t <= 2 * delta, "node {node} got {s} at {t}");
        }
    }
}

#[test]
fn delivery_success_matches_connectivity_oracle_exactly() {
    // Randomized instances: delivery to every interested honest node
    // succeeds exactly when the honest interested subgraph is connected
    // (the publisher is always an interested honest node).
    let mut rng = ChaCha8Rng::seed_from_u64(0xD15C);
    let mut checked = 0;
    for trial in 0..250u64 {
        let n = 4 + (rng.random::<u64>() % 10) as usize;
        let p = rng.random::<f64>() * 0.6;
        let alpha = rng.random::<f64>() * 0.4;
        let g = generate_graph(n, p, 0xA000 + trial, alpha, 0xB000 + trial);
        let symbols: Vec<SymbolId> = (0..4).map(|i| SymbolId::new(1, i)).collect();
        let interests: Vec<BTreeSet<SymbolId>> = (0..n)
            .map(|_| {
                symbols
                    .iter()
                    .copied()
                    .filter(|_| rng.random::<f64>() < 0.5)
                    .collect()
            })
            .collect();
        let mut pubs = Vec::new();
        for (si, s) in symbols.iter().enumerate() {
            if let Some(holder) = (0..n).find(|&i| g.honest[i] && interests[i].contains(s)) {
                pubs.push((holder, *s, vec![si as u8; 8]));
            }
        }
        let run = selective_broadcast_round(&g, &interests, &pubs, 2, 0xC000 + trial, &BTreeSet::new());
        for (holder, s, _) in &pubs {
            let connected = interest_subgraph_connected(&g, &interests, *s);
            let all_received = (0..n)
                .filter(|&i| g.honest[i] && interests[i].contains(s))
                .all(|i| run.delivered[i].contains_key(s));
            assert_eq!(
                all_received, connected,
                "trial {trial} symbol {s} holder {holder}"
            );
            checked += 1;
        }
    }
    assert!(checked >= 600, "exercised {checked} (graph, symbol) instances");
}

#[test]
fn traces_are_byte_identical_across_runs() {
    let g = generate_graph(12, 0.3, 21, 0.25, 5);
    let symbols: Vec<SymbolId> = (0..5).map(|i| SymbolId::new(1, i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let interests: Vec<BTreeSet<SymbolId>> = (0..g.n)
        .map(|_| {
            symbols
                .iter()
                .copied()
                .filter(|_| rng.random::<f64>() < 0.6)
                .collect()
        })
        .collect();
    let pubs: Vec<(usize, SymbolId, Vec<u8>)> = symbols
        .iter()
        .enumerate()
        .map(|(i, s)| (i, *s, vec![i as u8; 32]))
        .collect();
    let a = selective_broadcast_round(&g, &interests, &pubs, 3, 99, &BTreeSet::new());
    let b = selective_broadcast_round(&g, &interests, &pubs, 3, 99, &BTreeSet::new());
    assert_eq!(export_trace(&a.report.trace), export_trace(&b.report.trace));
    assert!(!a.report.trace.is_empty());
}

#[test]
fn no_delivery_later_than_send_plus_delta() {
    // Every hop in the trace takes between 1 and delta ticks. The trace
    // records receive ticks; reconstruct hops from consecutive events.
    let delta = 4u64;
    let g = generate_graph(10, 0.5, 31, 0.0, 0);
    let run = gossip(&g, 0, test_header(7), Rc::new(|_| true), delta, 3, &BTreeSet::new());
    // First receipt of the flood at each node is bounded by delta times the
    // hop distance; with a connected G(10, 0.5) the diameter is tiny, but
    // the hard per-hop bound is what matters here: every trace event's tick
    // is at least 1 and events only chain forward.
    for e in &run.report.trace {
        assert!(e.tick >= 1);
    }
    let max_tick = run.report.trace.iter().map(|e| e.tick).max().unwrap();
    assert!(max_tick <= delta * g.n as u64);
}

#[test]
fn communication_counters_track_interest_bytes_separately() {
    let g = generate_graph(6, 1.0, 2, 0.0, 0);
    let s = SymbolId::new(1, 0);
    let interests: Vec<BTreeSet<SymbolId>> = (0..g.n).map(|_| [s].into_iter().collect()).collect();
    let pubs = vec![(0usize, s, vec![0u8; 64])];
    let run = selective_broadcast_round(&g, &interests, &pubs, 2, 1, &BTreeSet::new());
    for c in &run.report.counters {
        assert!(c.interest_bytes_out > 0);
        assert!(c.bytes_out >= c.interest_bytes_out);
    }
}
