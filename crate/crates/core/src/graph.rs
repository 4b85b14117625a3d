//! Graph containers, neighborhood closure, update-set partitioning and
//! edge-recovery metrics.
//!
//! Nodes are 0-based indices. Undirected edges are always stored with the
//! smaller index first.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type NodeSet = BTreeSet<NodeId>;

/// Anything that exposes an undirected adjacency structure over `0..p`.
pub trait Adjacency {
    fn node_count(&self) -> usize;

    /// Iterator over canonical `(s, t)` pairs with `s < t`.
    fn edge_pairs(&self) -> Box<dyn Iterator<Item = (NodeId, NodeId)> + '_>;

    fn adjacency_lists(&self) -> Vec<Vec<NodeId>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for (s, t) in self.edge_pairs() {
            adj[s].push(t);
            adj[t].push(s);
        }
        adj
    }

    fn max_degree(&self) -> usize {
        self.adjacency_lists().iter().map(Vec::len).max().unwrap_or(0)
    }
}

fn canonical(s: NodeId, t: NodeId) -> (NodeId, NodeId) {
    if s < t {
        (s, t)
    } else {
        (t, s)
    }
}

fn check_node(node: NodeId, p: usize) -> Result<()> {
    if node >= p {
        Err(Error::NodeOutOfRange { node, p })
    } else {
        Ok(())
    }
}

/// Weighted undirected graph: the parameter vector of an Ising model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct GraphSpec {
    p: usize,
    edges: Vec<(NodeId, NodeId, f64)>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    p: usize,
    edges: Vec<(NodeId, NodeId, f64)>,
}

impl TryFrom<RawGraph> for GraphSpec {
    type Error = Error;

    fn try_from(raw: RawGraph) -> Result<Self> {
        GraphSpec::new(raw.p, raw.edges)
    }
}

impl From<GraphSpec> for RawGraph {
    fn from(g: GraphSpec) -> Self {
        RawGraph { p: g.p, edges: g.edges }
    }
}

impl GraphSpec {
    /// Builds a graph, canonicalizing each edge to `s < t` and sorting.
    pub fn new(p: usize, edges: impl IntoIterator<Item = (NodeId, NodeId, f64)>) -> Result<Self> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for (s, t, w) in edges {
            check_node(s, p)?;
            check_node(t, p)?;
            if s == t {
                return Err(Error::InvalidGraph(format!("self-loop on node {s}")));
            }
            if !w.is_finite() {
                return Err(Error::InvalidGraph(format!("non-finite weight on ({s}, {t})")));
            }
            if w == 0.0 {
                return Err(Error::InvalidGraph(format!("zero weight listed on ({s}, {t})")));
            }
            let (s, t) = canonical(s, t);
            if !seen.insert((s, t)) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({s}, {t})")));
            }
            out.push((s, t, w));
        }
        out.sort_by_key(|e| (e.0, e.1));
        Ok(GraphSpec { p, edges: out })
    }

    pub fn empty(p: usize) -> Self {
        GraphSpec { p, edges: Vec::new() }
    }

    /// Graph where every listed pair carries the same weight.
    pub fn uniform(p: usize, pairs: &[(NodeId, NodeId)], weight: f64) -> Result<Self> {
        Self::new(p, pairs.iter().map(|&(s, t)| (s, t, weight)))
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &[(NodeId, NodeId, f64)] {
        &self.edges
    }

    pub fn weight(&self, s: NodeId, t: NodeId) -> f64 {
        let (s, t) = canonical(s, t);
        self.edges
            .binary_search_by(|e| (e.0, e.1).cmp(&(s, t)))
            .map(|i| self.edges[i].2)
            .unwrap_or(0.0)
    }

    /// Dense symmetric `p × p` weight matrix with zero diagonal.
    pub fn weight_matrix(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.p]; self.p];
        for &(s, t, w) in &self.edges {
            m[s][t] = w;
            m[t][s] = w;
        }
        m
    }

    pub fn edge_set(&self) -> EdgeSet {
        EdgeSet {
            p: self.p,
            edges: self.edges.iter().map(|&(s, t, _)| (s, t)).collect(),
        }
    }

    /// Relabels nodes: node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[NodeId]) -> Result<Self> {
        Self::new(self.p, self.edges.iter().map(|&(s, t, w)| (perm[s], perm[t], w)))
    }
}

impl Adjacency for GraphSpec {
    fn node_count(&self) -> usize {
        self.p
    }

    fn edge_pairs(&self) -> Box<dyn Iterator<Item = (NodeId, NodeId)> + '_> {
        Box::new(self.edges.iter().map(|&(s, t, _)| (s, t)))
    }
}

/// Unweighted undirected edge set, as produced by an estimator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawEdgeSet", into = "RawEdgeSet")]
pub struct EdgeSet {
    p: usize,
    edges: BTreeSet<(NodeId, NodeId)>,
}

#[derive(Serialize, Deserialize)]
struct RawEdgeSet {
    p: usize,
    edges: Vec<(NodeId, NodeId)>,
}

impl TryFrom<RawEdgeSet> for EdgeSet {
    type Error = Error;

    fn try_from(raw: RawEdgeSet) -> Result<Self> {
        EdgeSet::new(raw.p, raw.edges)
    }
}

impl From<EdgeSet> for RawEdgeSet {
    fn from(e: EdgeSet) -> Self {
        RawEdgeSet { p: e.p, edges: e.edges.into_iter().collect() }
    }
}

impl EdgeSet {
    pub fn new(p: usize, pairs: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        let mut edges = BTreeSet::new();
        for (s, t) in pairs {
            check_node(s, p)?;
            check_node(t, p)?;
            if s == t {
                return Err(Error::InvalidGraph(format!("self-loop on node {s}")));
            }
            edges.insert(canonical(s, t));
        }
        Ok(EdgeSet { p, edges })
    }

    pub fn empty(p: usize) -> Self {
        EdgeSet { p, edges: BTreeSet::new() }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, s: NodeId, t: NodeId) -> bool {
        self.edges.contains(&canonical(s, t))
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.edges.is_subset(&other.edges)
    }
}

impl Adjacency for EdgeSet {
    fn node_count(&self) -> usize {
        self.p
    }

    fn edge_pairs(&self) -> Box<dyn Iterator<Item = (NodeId, NodeId)> + '_> {
        Box::new(self.edges.iter().copied())
    }
}

/// Closed neighborhood: `nodes` together with every node adjacent to one of them.
pub fn neighbors<G: Adjacency + ?Sized>(graph: &G, nodes: &NodeSet) -> Result<NodeSet> {
    let p = graph.node_count();
    for &v in nodes {
        check_node(v, p)?;
    }
    let mut out = nodes.clone();
    for (s, t) in graph.edge_pairs() {
        if nodes.contains(&s) {
            out.insert(t);
        }
        if nodes.contains(&t) {
            out.insert(s);
        }
    }
    Ok(out)
}

/// Connected components of the subgraph induced by `subset`, each sorted,
/// ordered by smallest member.
pub fn induced_components<G: Adjacency + ?Sized>(graph: &G, subset: &NodeSet) -> Vec<Vec<NodeId>> {
    let adj = graph.adjacency_lists();
    let mut seen = NodeSet::new();
    let mut components = Vec::new();
    for &start in subset {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if subset.contains(&u) && seen.insert(u) {
                    comp.push(u);
                    queue.push_back(u);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// One connected piece of the update set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub nodes: Vec<NodeId>,
    pub candidates: Vec<NodeId>,
}

impl Component {
    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.nodes.binary_search(&v).is_ok()
    }
}

/// Candidate / participant / update-set split used by the EM refinement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodePartition {
    pub candidates: NodeSet,
    pub participants: NodeSet,
    pub update_set: NodeSet,
    pub components: Vec<Component>,
}

impl NodePartition {
    /// Index of the component holding `v`, if `v` is in the update set.
    pub fn component_of(&self, v: NodeId) -> Option<usize> {
        self.components.iter().position(|c| c.contains(v))
    }

    pub fn max_candidates(&self) -> usize {
        self.components.iter().map(Component::candidate_count).max().unwrap_or(0)
    }
}

/// `U = N(N(C))` on the estimated edge set, split into connected components.
pub fn update_partition(edges: &EdgeSet, candidates: &NodeSet) -> Result<NodePartition> {
    let first = neighbors(edges, candidates)?;
    let update_set = neighbors(edges, &first)?;
    let participants = update_set.difference(candidates).copied().collect();
    let components = induced_components(edges, &update_set)
        .into_iter()
        .map(|nodes| {
            let cands = nodes.iter().copied().filter(|v| candidates.contains(v)).collect();
            Component { nodes, candidates: cands }
        })
        .collect();
    Ok(NodePartition {
        candidates: candidates.clone(),
        participants,
        update_set,
        components,
    })
}

/// Confusion counts over unordered node pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeMetrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl EdgeMetrics {
    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }

    pub fn pairs(&self) -> usize {
        self.positives() + self.negatives()
    }

    /// True-positive rate; zero when the class has no true edges.
    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.positives())
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.negatives())
    }

    /// `(FP + FN) / pairs`.
    pub fn error_rate(&self) -> f64 {
        ratio(self.fp + self.fn_, self.pairs())
    }

    pub fn merge(&mut self, other: &EdgeMetrics) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Counts over pairs with at least one endpoint in `node_class`.
pub fn edge_metrics(estimate: &EdgeSet, truth: &GraphSpec, node_class: &NodeSet) -> Result<EdgeMetrics> {
    edge_metrics_excluding(estimate, truth, node_class, &NodeSet::new())
}

/// Like [`edge_metrics`], but drops pairs touching any node of `exclude`.
pub fn edge_metrics_excluding(
    estimate: &EdgeSet,
    truth: &GraphSpec,
    include: &NodeSet,
    exclude: &NodeSet,
) -> Result<EdgeMetrics> {
    if estimate.p() != truth.p() {
        return Err(Error::NodeCountMismatch { left: estimate.p(), right: truth.p() });
    }
    let p = truth.p();
    for &v in include.iter().chain(exclude) {
        check_node(v, p)?;
    }
    let true_edges = truth.edge_set();
    let mut m = EdgeMetrics::default();
    for s in 0..p {
        for t in s + 1..p {
            let touches = include.contains(&s) || include.contains(&t);
            let excluded = exclude.contains(&s) || exclude.contains(&t);
            if !touches || excluded {
                continue;
            }
            match (true_edges.contains(s, t), estimate.contains(s, t)) {
                (true, true) => m.tp += 1,
                (true, false) => m.fn_ += 1,
                (false, true) => m.fp += 1,
                (false, false) => m.tn += 1,
            }
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[usize]) -> NodeSet {
        v.iter().copied().collect()
    }

    #[test]
    fn chain_neighbors() {
        let g = GraphSpec::uniform(3, &[(0, 1), (1, 2)], 0.5).unwrap();
        assert_eq!(neighbors(&g, &set(&[1])).unwrap(), set(&[0, 1, 2]));
    }

    #[test]
    fn empty_graph_neighbors_is_identity() {
        let g = GraphSpec::empty(5);
        assert_eq!(neighbors(&g, &set(&[3])).unwrap(), set(&[3]));
    }

    #[test]
    fn complete_graph_neighbors() {
        let pairs: Vec<_> = (0..4).flat_map(|s| (s + 1..4).map(move |t| (s, t))).collect();
        let g = GraphSpec::uniform(4, &pairs, 1.0).unwrap();
        assert_eq!(neighbors(&g, &set(&[0])).unwrap(), set(&[0, 1, 2, 3]));
    }

    #[test]
    fn neighbors_rejects_bad_index() {
        let g = GraphSpec::empty(3);
        assert!(matches!(neighbors(&g, &set(&[3])), Err(Error::NodeOutOfRange { node: 3, p: 3 })));
    }

    #[test]
    fn chain_partition() {
        let e = EdgeSet::new(5, [(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let part = update_partition(&e, &set(&[2])).unwrap();
        assert_eq!(part.update_set, set(&[0, 1, 2, 3, 4]));
        assert_eq!(part.participants, set(&[0, 1, 3, 4]));
        assert_eq!(part.components.len(), 1);
        assert_eq!(part.components[0].candidates, vec![2]);
    }

    #[test]
    fn disjoint_triangles_partition() {
        let e = EdgeSet::new(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        let part = update_partition(&e, &set(&[0])).unwrap();
        assert_eq!(part.update_set, set(&[0, 1, 2]));
        assert_eq!(part.components.len(), 1);
    }

    #[test]
    fn graph_validation() {
        assert!(GraphSpec::new(3, [(0, 0, 1.0)]).is_err());
        assert!(GraphSpec::new(3, [(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(GraphSpec::new(3, [(0, 1, f64::NAN)]).is_err());
        assert!(GraphSpec::new(3, [(0, 1, 0.0)]).is_err());
        assert!(GraphSpec::new(3, [(0, 5, 1.0)]).is_err());
        let g = GraphSpec::new(3, [(2, 0, 0.7)]).unwrap();
        assert_eq!(g.edges(), &[(0, 2, 0.7)]);
        assert_eq!(g.weight(2, 0), 0.7);
    }

    #[test]
    fn metrics_perfect_and_empty() {
        let g = GraphSpec::uniform(4, &[(0, 1), (1, 2), (2, 3)], 0.5).unwrap();
        let all = set(&[0, 1, 2, 3]);
        let m = edge_metrics(&g.edge_set(), &g, &all).unwrap();
        assert_eq!((m.fp, m.fn_, m.tp, m.tn), (0, 0, 3, 3));
        let m = edge_metrics(&EdgeSet::empty(4), &g, &all).unwrap();
        assert_eq!((m.fn_, m.fp), (3, 0));
    }

    #[test]
    fn metrics_complement() {
        let g = GraphSpec::uniform(4, &[(0, 1), (1, 2), (2, 3)], 0.5).unwrap();
        let comp = EdgeSet::new(4, [(0, 2), (0, 3), (1, 3)]).unwrap();
        let m = edge_metrics(&comp, &g, &set(&[0, 1, 2, 3])).unwrap();
        assert_eq!((m.tp, m.tn), (0, 0));
    }

    #[test]
    fn metrics_mismatched_p() {
        let g = GraphSpec::empty(4);
        assert!(edge_metrics(&EdgeSet::empty(3), &g, &NodeSet::new()).is_err());
    }

    #[test]
    fn json_format() {
        let g = GraphSpec::new(3, [(0, 1, 0.5)]).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"p":3,"edges":[[0,1,0.5]]}"#);
        let e: EdgeSet = serde_json::from_str(r#"{"p":3,"edges":[[2,1]]}"#).unwrap();
        assert!(e.contains(1, 2));
        assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"p":3,"edges":[[1,2]]}"#);
        assert!(serde_json::from_str::<GraphSpec>(r#"{"p":2,"edges":[[0,0,1.0]]}"#).is_err());
    }
}
