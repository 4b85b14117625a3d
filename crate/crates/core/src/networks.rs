//! Benchmark topologies.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Adjacency, GraphSpec, NodeId, NodeSet};
use crate::ising::RngSeed;

/// A ground-truth graph together with its designated candidate nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Network {
    pub graph: GraphSpec,
    pub candidates: NodeSet,
    pub labels: Vec<String>,
}

/// Fixture version of [`symmetric_candidate_network`]; bump on any topology change.
pub const SYMMETRIC_NETWORK_VERSION: u32 = 2;

/// The 12-node symmetric benchmark: three identical blocks `(A,B,C,D)`,
/// `(E,F,G,H)`, `(I,J,K,L)` whose fourth node is the candidate. Within a
/// block the candidate and the three participants form the cycle
/// `D–A–B–C–D`. Consecutive blocks are joined twice, from `C` to the next
/// block's `A` and from `B` to the next block's `B`. Every edge weighs `1/2`.
pub fn symmetric_candidate_network() -> Network {
    let mut pairs = Vec::new();
    for b in 0..3 {
        let (a, bb, c, d) = (4 * b, 4 * b + 1, 4 * b + 2, 4 * b + 3);
        let next = (4 * (b + 1)) % 12;
        pairs.extend([(d, a), (d, c), (a, bb), (bb, c), (c, next), (bb, next + 1)]);
    }
    let graph = GraphSpec::uniform(12, &pairs, 0.5).expect("fixture is valid");
    Network {
        graph,
        candidates: [3, 7, 11].into_iter().collect(),
        labels: (b'A'..=b'L').map(|c| (c as char).to_string()).collect(),
    }
}

/// Synthetic stand-in for a fitted brain-region network.
///
/// Builds a connected `p`-node graph where every node is within two hops of
/// one of `max(1, round(0.15 p))` candidates: each candidate gets two or
/// three private neighbors, the remaining nodes hang off those neighbors,
/// and a few extra participant edges close loops. Degrees are capped at 5.
/// Weights are drawn uniformly on `[0.3, 0.9]` and then pulled toward their
/// mean: `w ← (1 − shrinkage)·w + shrinkage·mean`.
pub fn fmri_like_network(p: usize, shrinkage: f64, seed: RngSeed) -> Result<Network> {
    if !(0.0..=1.0).contains(&shrinkage) {
        return Err(Error::InvalidArgument(format!("shrinkage {shrinkage} outside [0, 1]")));
    }
    let c = ((0.15 * p as f64).round() as usize).max(1);
    if p < 3 * c + 1 {
        return Err(Error::InvalidArgument(format!("{p} nodes is too few for {c} candidates")));
    }
    const MAX_DEGREE: usize = 5;
    let mut rng = seed.rng();
    let mut edges: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    let mut degree = vec![0usize; p];
    let add = |s: NodeId, t: NodeId, edges: &mut BTreeSet<(NodeId, NodeId)>, degree: &mut Vec<usize>| {
        let key = (s.min(t), s.max(t));
        if s != t && degree[s] < MAX_DEGREE && degree[t] < MAX_DEGREE && edges.insert(key) {
            degree[s] += 1;
            degree[t] += 1;
            true
        } else {
            false
        }
    };

    let candidates: Vec<NodeId> = (0..c).collect();
    let mut next = c;
    let mut first_ring: Vec<Vec<NodeId>> = Vec::new();
    for &cand in &candidates {
        let want = if rng.gen_bool(0.5) { 3 } else { 2 };
        let k = want.min((p - next).saturating_sub(2 * (c - cand - 1)).max(1));
        let ring: Vec<NodeId> = (next..next + k).collect();
        next += k;
        for &v in &ring {
            add(cand, v, &mut edges, &mut degree);
        }
        first_ring.push(ring);
    }
    // join neighboring blocks so the graph is connected
    for w in first_ring.windows(2) {
        let a = *w[0].choose(&mut rng).expect("nonempty ring");
        let b = *w[1].choose(&mut rng).expect("nonempty ring");
        add(a, b, &mut edges, &mut degree);
    }
    let ring_nodes: Vec<NodeId> = first_ring.concat();
    for v in next..p {
        let mut attached = false;
        for _ in 0..20 {
            let u = *ring_nodes.choose(&mut rng).expect("nonempty");
            if add(u, v, &mut edges, &mut degree) {
                attached = true;
                break;
            }
        }
        if !attached {
            let u = *ring_nodes.iter().min_by_key(|&&u| degree[u]).expect("nonempty");
            edges.insert((u.min(v), u.max(v)));
            degree[u] += 1;
            degree[v] += 1;
        }
    }
    // loops among participants
    let participants: Vec<NodeId> = (c..p).collect();
    for _ in 0..p / 4 {
        let s = *participants.choose(&mut rng).expect("nonempty");
        let t = *participants.choose(&mut rng).expect("nonempty");
        add(s, t, &mut edges, &mut degree);
    }

    let raw: Vec<f64> = edges.iter().map(|_| rng.gen_range(0.3..0.9)).collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let weights = raw.iter().map(|w| (1.0 - shrinkage) * w + shrinkage * mean);
    let graph = GraphSpec::new(p, edges.iter().zip(weights).map(|(&(s, t), w)| (s, t, w)))?;
    debug_assert!(graph.max_degree() <= MAX_DEGREE + 1);
    Ok(Network {
        graph,
        candidates: candidates.into_iter().collect(),
        labels: (0..p).map(|v| format!("R{v}")).collect(),
    })
}
