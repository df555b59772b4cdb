//! Random polytrees and evidence sets for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{decode_config, CptEntry, Evidence, Network, NetworkDocument, NodeDocument};

#[derive(Debug, Clone)]
pub struct PolytreeSpec {
    pub nodes: usize,
    pub min_alternatives: usize,
    pub max_alternatives: usize,
    /// Counts are drawn uniformly from `[0, max_count)`.
    pub max_count: f64,
    /// Edges that would give a node more parents are flipped.
    pub max_parents: usize,
}

impl Default for PolytreeSpec {
    fn default() -> Self {
        Self {
            nodes: 8,
            min_alternatives: 2,
            max_alternatives: 3,
            max_count: 5.0,
            max_parents: 3,
        }
    }
}

impl PolytreeSpec {
    pub fn binary(nodes: usize) -> Self {
        Self {
            nodes,
            max_alternatives: 2,
            ..Self::default()
        }
    }
}

/// Generates a connected polytree: node `i > 0` is joined to a uniformly
/// chosen earlier node, with the edge direction picked at random.
pub fn random_polytree<R: Rng + ?Sized>(rng: &mut R, spec: &PolytreeSpec) -> Network {
    assert!(spec.nodes >= 1, "need at least one node");
    assert!(spec.min_alternatives >= 2 && spec.max_alternatives >= spec.min_alternatives);
    let n = spec.nodes;
    let alternatives: Vec<usize> = (0..n)
        .map(|_| rng.random_range(spec.min_alternatives..=spec.max_alternatives))
        .collect();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        let j = rng.random_range(0..i);
        let down = rng.random_bool(0.5);
        let (from, to) = if (down && parents[i].len() < spec.max_parents)
            || parents[j].len() >= spec.max_parents
        {
            (j, i)
        } else {
            (i, j)
        };
        parents[to].push(from);
    }
    // Shuffle parent order so the row-indexing convention gets exercised.
    for ps in &mut parents {
        ps.shuffle(rng);
    }
    let nodes = (0..n)
        .map(|i| {
            let cards: Vec<usize> = parents[i].iter().map(|&p| alternatives[p]).collect();
            let rows: usize = cards.iter().product();
            NodeDocument {
                id: format!("N{i}"),
                alternatives: alternatives[i],
                parents: parents[i].iter().map(|p| format!("N{p}")).collect(),
                cpt: (0..rows)
                    .map(|r| CptEntry {
                        given: decode_config(&cards, r),
                        counts: (0..alternatives[i])
                            .map(|_| rng.random::<f64>() * spec.max_count)
                            .collect(),
                    })
                    .collect(),
            }
        })
        .collect();
    Network::from_document(&NetworkDocument {
        name: "random-polytree".into(),
        nodes,
    })
    .expect("generator emits valid polytrees")
}

/// Instantiates `count` distinct random nodes (capped at the network size)
/// to random alternatives.
pub fn random_evidence<R: Rng + ?Sized>(rng: &mut R, net: &Network, count: usize) -> Evidence {
    let mut order: Vec<usize> = (0..net.len()).collect();
    order.shuffle(rng);
    let mut ev = Evidence::new();
    for &node in order.iter().take(count) {
        let alt = rng.random_range(0..net.alternatives(node));
        ev.insert(net, node, alt).expect("fresh node, in-range alternative");
    }
    ev
}
