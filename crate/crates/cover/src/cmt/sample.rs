//! Interleaved subtree sampling: choose c bottom-layer symbols, then take
//! their paths to the root together with every sibling of a path symbol.
//! Because each path symbol's sibling group contains two coded symbols, the
//! per-layer marginal distribution of the sampled set is uniform over the
//! whole layer, coded symbols included.

use super::{Layout, SymbolId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledSubtree {
    pub c: usize,
    /// The c chosen bottom-layer indices.
    pub bottom_choices: Vec<u32>,
    /// desired[layer-1]: sampled symbol indices per layer.
    desired: Vec<BTreeSet<u32>>,
}

/// Deterministically sample a subtree of c bottom symbols plus path-sibling
/// closure. `c` is clamped to the bottom layer width.
pub fn sample_subtree(layout: &Layout, c: usize, seed: u64) -> SampledSubtree {
    let bottom = layout.bottom();
    let bottom_width = layout.total_width(bottom);
    let c = c.clamp(1, bottom_width);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bottom_choices: Vec<u32> = rand::seq::index::sample(&mut rng, bottom_width, c)
        .iter()
        .map(|i| i as u32)
        .collect();
    bottom_choices.sort_unstable();

    let mut desired: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); bottom as usize];
    // Layer 1 is needed in full: the root commitment binds all top symbols.
    desired[0] = (0..layout.total_width(1) as u32).collect();
    for &choice in &bottom_choices {
        let mut cur = SymbolId::new(bottom, choice);
        while cur.layer >= 2 {
            let (parent, _) = layout.parent_slot(cur);
            for sibling in layout.group_of(parent) {
                desired[cur.layer as usize - 1].insert(sibling.index);
            }
            cur = parent;
        }
    }
    SampledSubtree {
        c,
        bottom_choices,
        desired,
    }
}

impl SampledSubtree {
    pub fn desired(&self, layer: u16) -> &BTreeSet<u32> {
        &self.desired[layer as usize - 1]
    }

    pub fn depth(&self) -> u16 {
        self.desired.len() as u16
    }

    pub fn contains(&self, id: SymbolId) -> bool {
        id.layer >= 1
            && id.layer <= self.depth()
            && self.desired[id.layer as usize - 1].contains(&id.index)
    }

    pub fn ids(&self) -> impl Iterator<Item = SymbolId> + '_ {
        self.desired.iter().enumerate().flat_map(|(i, set)| {
            set.iter().map(move |&index| SymbolId::new(i as u16 + 1, index))
        })
    }

    pub fn total_len(&self) -> usize {
        self.desired.iter().map(|s| s.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_sampling_covers_whole_tree() {
        let layout = Layout::for_base(16, 4);
        let sub = sample_subtree(&layout, layout.total_width(layout.bottom()), 1);
        for layer in 1..=layout.depth() {
            assert_eq!(sub.desired(layer).len(), layout.total_width(layer));
        }
    }

    #[test]
    fn single_sample_takes_one_group_per_layer() {
        let layout = Layout::for_base(64, 4);
        for seed in 0..20 {
            let sub = sample_subtree(&layout, 1, seed);
            for layer in 2..=layout.depth() {
                assert_eq!(sub.desired(layer).len(), 4, "seed {seed} layer {layer}");
            }
            assert_eq!(sub.desired(1).len(), 4);
            assert!(sub.desired(layout.bottom()).contains(&sub.bottom_choices[0]));
        }
    }

    #[test]
    fn closure_contains_paths_and_siblings() {
        let layout = Layout::for_base(64, 4);
        let sub = sample_subtree(&layout, 4, 9);
        for &b in &sub.bottom_choices {
            let mut cur = SymbolId::new(layout.bottom(), b);
            while cur.layer >= 2 {
                let (parent, _) = layout.parent_slot(cur);
                for sib in layout.group_of(parent) {
                    assert!(sub.contains(sib), "sibling {sib} of {cur} missing");
                }
                assert!(sub.contains(parent) || parent.layer == 1);
                cur = parent;
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let layout = Layout::for_base(64, 4);
        assert_eq!(sample_subtree(&layout, 8, 42), sample_subtree(&layout, 8, 42));
        assert_ne!(
            sample_subtree(&layout, 8, 42).bottom_choices,
            sample_subtree(&layout, 8, 43).bottom_choices
        );
    }
}
