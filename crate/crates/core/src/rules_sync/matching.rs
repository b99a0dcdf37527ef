//! Partitioning a set of agent pairs into conflict-free layers.

use std::collections::BTreeSet;

use petgraph::algo::maximum_matching;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::state::AgentId;

/// An unordered pair, stored with the smaller id first.
pub type Pair = (AgentId, AgentId);

pub fn normalize((a, b): Pair) -> Pair {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Splits `pairs` into layers, each a matching (no agent twice) and each a
/// maximum matching of the pairs not yet placed. The random insertion order
/// decides between equally large matchings. Layers are returned sorted.
pub fn conflict_free_pairs(pairs: &[Pair], rng: &mut impl Rng) -> Vec<Vec<Pair>> {
    let mut remaining: Vec<Pair> = pairs
        .iter()
        .copied()
        .filter(|(a, b)| a != b)
        .map(normalize)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut layers = Vec::new();
    while !remaining.is_empty() {
        remaining.shuffle(rng);
        let mut graph = UnGraph::<AgentId, ()>::with_capacity(2 * remaining.len(), remaining.len());
        let mut nodes: std::collections::HashMap<AgentId, NodeIndex> = Default::default();
        for &(a, b) in &remaining {
            let na = *nodes.entry(a).or_insert_with(|| graph.add_node(a));
            let nb = *nodes.entry(b).or_insert_with(|| graph.add_node(b));
            graph.add_edge(na, nb, ());
        }
        let matching = maximum_matching(&graph);
        let layer: BTreeSet<Pair> = matching.edges().map(|(x, y)| normalize((graph[x], graph[y]))).collect();
        remaining.retain(|p| !layer.contains(p));
        layers.push(layer.into_iter().collect());
    }
    layers
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Site};

    fn rng() -> impl Rng {
        stream(5, Site::MatingLayers, 0, 0)
    }

    #[test]
    fn disjoint_pairs_share_a_layer() {
        let layers = conflict_free_pairs(&[(1, 2), (3, 4)], &mut rng());
        assert_eq!(layers, vec![vec![(1, 2), (3, 4)]]);
    }

    #[test]
    fn shared_agent_forces_two_layers() {
        let layers = conflict_free_pairs(&[(1, 2), (1, 3)], &mut rng());
        assert_eq!(layers.len(), 2);
        assert!(layers.iter().all(|l| l.len() == 1));
    }

    #[test]
    fn path_takes_both_ends_first() {
        for seed in 0..20 {
            let mut r = stream(seed, Site::MatingLayers, 0, 0);
            let layers = conflict_free_pairs(&[(1, 2), (2, 3), (3, 4)], &mut r);
            assert_eq!(layers, vec![vec![(1, 2), (3, 4)], vec![(2, 3)]]);
        }
    }

    #[test]
    fn star_needs_one_layer_per_spoke() {
        let layers = conflict_free_pairs(&[(1, 2), (1, 3), (4, 1)], &mut rng());
        assert_eq!(layers.len(), 3);
    }

    #[test]
    fn duplicates_and_orientation_collapse() {
        let layers = conflict_free_pairs(&[(2, 1), (1, 2), (3, 3)], &mut rng());
        assert_eq!(layers, vec![vec![(1, 2)]]);
        assert!(conflict_free_pairs(&[], &mut rng()).is_empty());
    }
}
