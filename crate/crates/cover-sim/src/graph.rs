//! Seeded Erdős–Rényi topology with per-node honesty flags, and the exact
//! interest-subgraph connectivity oracle used to cross-check selective
//! broadcast.

use cover::cmt::SymbolId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

#[derive(Debug, Clone)]
pub struct NetworkGraph {
    pub n: usize,
    pub p: f64,
    pub seed: u64,
    /// Sorted adjacency lists; undirected, no self-loops.
    pub adj: Vec<Vec<usize>>,
    pub honest: Vec<bool>,
}

/// Each unordered pair is connected independently with probability p;
/// floor(alpha * n) nodes are flagged dishonest, drawn uniformly from a
/// separate placement seed.
pub fn generate_graph(n: usize, p: f64, seed: u64, alpha: f64, placement_seed: u64) -> NetworkGraph {
    assert!((0.0..=1.0).contains(&p), "p out of range");
    assert!((0.0..1.0).contains(&alpha), "alpha out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    let mut honest = vec![true; n];
    let dishonest = ((alpha * n as f64).floor() as usize).min(n);
    if dishonest > 0 {
        let mut prng = ChaCha8Rng::seed_from_u64(placement_seed);
        for i in rand::seq::index::sample(&mut prng, n, dishonest) {
            honest[i] = false;
        }
    }
    NetworkGraph {
        n,
        p,
        seed,
        adj,
        honest,
    }
}

impl NetworkGraph {
    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adj[node]
    }

    pub fn dishonest_count(&self) -> usize {
        self.honest.iter().filter(|&&h| !h).count()
    }

    /// Add an extra node (returned id) wired to the given peers.
    pub fn add_node(&mut self, peers: &[usize]) -> usize {
        let id = self.n;
        self.n += 1;
        self.adj.push(peers.to_vec());
        for &p in peers {
            self.adj[p].push(id);
            self.adj[p].sort_unstable();
        }
        self.honest.push(true);
        self.adj[id].sort_unstable();
        id
    }
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Exact connectivity of the honest-interested subgraph for one symbol:
/// true when every honest node interested in the symbol sits in a single
/// component of the subgraph induced by honest interested nodes. Vacuously
/// true for zero or one interested node.
pub fn interest_subgraph_connected(
    graph: &NetworkGraph,
    interests: &[BTreeSet<SymbolId>],
    symbol: SymbolId,
) -> bool {
    let members: Vec<usize> = (0..graph.n)
        .filter(|&v| graph.honest[v] && interests.get(v).is_some_and(|s| s.contains(&symbol)))
        .collect();
    if members.len() <= 1 {
        return true;
    }
    let in_set: BTreeSet<usize> = members.iter().copied().collect();
    let mut dsu = Dsu::new(graph.n);
    for &v in &members {
        for &u in graph.neighbors(v) {
            if u > v && in_set.contains(&u) {
                dsu.union(u, v);
            }
        }
    }
    let root = dsu.find(members[0]);
    members.iter().all(|&v| dsu.find(v) == root)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_and_empty_graphs() {
        let g = generate_graph(10, 1.0, 1, 0.0, 0);
        assert_eq!(g.edge_count(), 45);
        let g = generate_graph(10, 0.0, 1, 0.0, 0);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_graph(50, 0.2, 7, 0.3, 9);
        let b = generate_graph(50, 0.2, 7, 0.3, 9);
        assert_eq!(a.adj, b.adj);
        assert_eq!(a.honest, b.honest);
        assert_eq!(a.dishonest_count(), 15);
    }

    #[test]
    fn mean_edge_count_matches_binomial() {
        // N=100, p=0.1: mean edges = 4950 * 0.1 = 495; binomial sigma over
        // 1000 seeds of the mean is sqrt(495*0.9/1000) ~ 0.67.
        let trials = 1000;
        let total: usize = (0..trials).map(|s| generate_graph(100, 0.1, s, 0.0, 0).edge_count()).sum();
        let mean = total as f64 / trials as f64;
        let sigma_mean = (4950.0 * 0.1 * 0.9 / trials as f64).sqrt();
        assert!(
            (mean - 495.0).abs() <= 3.0 * sigma_mean,
            "mean {mean}, expected 495 +- {:.2}",
            3.0 * sigma_mean
        );
    }

    #[test]
    fn single_interested_node_is_connected() {
        let g = generate_graph(4, 0.0, 1, 0.0, 0);
        let s = SymbolId::new(1, 0);
        let mut interests = vec![BTreeSet::new(); 4];
        interests[2].insert(s);
        assert!(interest_subgraph_connected(&g, &interests, s));
    }

    #[test]
    fn two_disconnected_interested_nodes_are_not() {
        let g = generate_graph(4, 0.0, 1, 0.0, 0);
        let s = SymbolId::new(1, 0);
        let mut interests = vec![BTreeSet::new(); 4];
        interests[0].insert(s);
        interests[3].insert(s);
        assert!(!interest_subgraph_connected(&g, &interests, s));
    }

    #[test]
    fn path_through_uninterested_node_does_not_count() {
        // 0 - 1 - 2 where only 0 and 2 are interested.
        let mut g = generate_graph(3, 0.0, 1, 0.0, 0);
        g.adj[0].push(1);
        g.adj[1].extend([0, 2]);
        g.adj[2].push(1);
        let s = SymbolId::new(1, 0);
        let mut interests = vec![BTreeSet::new(); 3];
        interests[0].insert(s);
        interests[2].insert(s);
        assert!(!interest_subgraph_connected(&g, &interests, s));
        interests[1].insert(s);
        assert!(interest_subgraph_connected(&g, &interests, s));
    }
}
