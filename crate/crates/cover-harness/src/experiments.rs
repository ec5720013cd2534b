//! Monte Carlo verification of the closed-form bounds: section coverage,
//! per-layer availability detection, and interest-subgraph connectivity.

use crate::bounds;
use crate::stats::McEstimate;
use cover::cmt::{sample_subtree, CmtContext, Layout, SymbolId};
use cover::hash::derive_seed;
use cover_sim::graph::{generate_graph, interest_subgraph_connected};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

/// Fraction of trials in which n_h uniform section draws cover all k
/// sections.
pub fn mc_coverage(k: u32, n_h: u64, trials: u64, seed: u64) -> McEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0;
    for _ in 0..trials {
        let mut hit = vec![false; k as usize];
        for _ in 0..n_h {
            hit[rng.random_range(0..k) as usize] = true;
        }
        if hit.iter().all(|&h| h) {
            successes += 1;
        }
    }
    McEstimate::new(successes, trials)
}

/// Exact coverage probability by enumeration of all k^{n_h} assignments;
/// small instances only.
pub fn exact_coverage(k: u32, n_h: u64) -> f64 {
    assert!((k as f64).powi(n_h as i32) <= 2e7, "enumeration too large");
    let mut covered = 0u64;
    let total = (k as u64).pow(n_h as u32);
    for mut assignment in 0..total {
        let mut hit = vec![false; k as usize];
        for _ in 0..n_h {
            hit[(assignment % k as u64) as usize] = true;
            assignment /= k as u64;
        }
        if hit.iter().all(|&h| h) {
            covered += 1;
        }
    }
    covered as f64 / total as f64
}

/// Per-layer detection: the rate at which a c-sample subtree intersects
/// the hidden set at its layer, over independent subtree draws.
pub fn mc_detection(
    layout: &Layout,
    layer: u16,
    hidden: &BTreeSet<u32>,
    c: usize,
    trials: u64,
    seed: u64,
) -> McEstimate {
    let mut successes = 0;
    for t in 0..trials {
        let sub = sample_subtree(layout, c, derive_seed(seed, t));
        if sub.desired(layer).iter().any(|i| hidden.contains(i)) {
            successes += 1;
        }
    }
    McEstimate::new(successes, trials)
}

pub struct ConnectivityRun {
    pub estimate: McEstimate,
    pub p_used: f64,
    pub bound: f64,
    pub r: f64,
    pub total_symbols: u64,
}

/// All-interest-subgraphs-connected rate over seeded graphs, with interests
/// drawn by the real subtree sampler at c = L/k. Compares against the
/// closed-form success bound at the prescribed p.
#[allow(clippy::too_many_arguments)]
pub fn mc_connectivity(
    n_h: u64,
    l: u64,
    k: u32,
    lambda: f64,
    p_override: Option<f64>,
    trials: u64,
    seed: u64,
    cmt: cover::cmt::CmtParams,
) -> Result<ConnectivityRun, bounds::BoundError> {
    let prescribed = bounds::connectivity_required_p(n_h, l, k, lambda)?;
    let p = p_override.unwrap_or(prescribed).min(1.0);
    let ctx = CmtContext::new(cmt, l as usize).expect("context");
    let layout = &ctx.layout;
    let c = (l / k as u64).max(1) as usize;
    let mut successes = 0;
    for t in 0..trials {
        let graph = generate_graph(n_h as usize, p, derive_seed(seed, 2 * t), 0.0, 0);
        let mut interests: Vec<BTreeSet<SymbolId>> = Vec::with_capacity(n_h as usize);
        for i in 0..n_h {
            let sub = sample_subtree(layout, c, derive_seed(seed, 0x1000 + 31 * t + i));
            interests.push(sub.ids().collect());
        }
        let mut symbols: BTreeSet<SymbolId> = BTreeSet::new();
        for set in &interests {
            symbols.extend(set.iter().copied());
        }
        if symbols
            .iter()
            .all(|&s| interest_subgraph_connected(&graph, &interests, s))
        {
            successes += 1;
        }
    }
    let r = bounds::download_fraction(l, k);
    let total_symbols = layout.total_symbols() as u64;
    Ok(ConnectivityRun {
        estimate: McEstimate::new(successes, trials),
        p_used: p,
        bound: bounds::connectivity_success_bound(total_symbols, r, n_h, lambda),
        r,
        total_symbols,
    })
}

/// Empirical per-layer inclusion frequencies of the subtree sampler; used
/// to cross-check marginal uniformity claims from the command line.
pub fn sampling_marginals(layout: &Layout, c: usize, trials: u64, seed: u64) -> BTreeMap<u16, Vec<u64>> {
    let mut counts: BTreeMap<u16, Vec<u64>> = (1..=layout.depth())
        .map(|l| (l, vec![0u64; layout.total_width(l)]))
        .collect();
    for t in 0..trials {
        let sub = sample_subtree(layout, c, derive_seed(seed, t));
        for id in sub.ids() {
            counts.get_mut(&id.layer).unwrap()[id.index as usize] += 1;
        }
    }
    counts
}
