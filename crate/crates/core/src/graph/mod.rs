//! Simple undirected graphs, instance generators, text I/O and the exact
//! brute-force oracles every other module is checked against.

mod generate;
mod io;
mod oracle;

use std::collections::HashSet;

use thiserror::Error;

pub use generate::{generate, with_random_weights, GraphKind};
pub use io::{parse_graph, write_graph};
pub(crate) use oracle::dijkstra;
pub use oracle::{
    enumerate_cuts, exact_diameter, exact_edge_connectivity, min_cut_side, oracle_apsp, CutRecord,
    DistanceTable, MAX_CUT_ENUMERATION_NODES,
};

pub type NodeId = usize;
pub type EdgeId = usize;

/// Exponent of the identifier space `[n^c]` and of the weight bound.
pub const DEFAULT_ID_EXPONENT: u32 = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("node {node} out of range for a graph on {n} nodes")]
    NodeOutOfRange { node: NodeId, n: usize },
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("parallel edge {0}-{1}")]
    ParallelEdge(NodeId, NodeId),
    #[error("edge {0}-{1} has weight 0; weights must be >= 1")]
    ZeroWeight(NodeId, NodeId),
    #[error("invalid generator parameters: {0}")]
    InvalidParameters(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("graph has {n} nodes; exhaustive cut enumeration is limited to {max}")]
    TooLargeForEnumeration { n: usize, max: usize },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub w: u64,
}

impl Edge {
    pub fn other(&self, x: NodeId) -> NodeId {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Simple undirected graph with positive integer weights.
///
/// Nodes are dense indices `0..n`. Each node additionally carries an
/// identifier (`label`) that protocols use for tie-breaking; labels default
/// to the index itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<(NodeId, EdgeId)>>,
    labels: Vec<u64>,
    weighted: bool,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
            labels: (0..n as u64).collect(),
            weighted: false,
        }
    }

    /// Builds an unweighted graph, rejecting loops and parallel edges.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        Self::from_weighted_edges(n, edges.into_iter().map(|(u, v)| (u, v, 1)), false)
    }

    pub fn from_weighted_edges<I>(n: usize, edges: I, weighted: bool) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (NodeId, NodeId, u64)>,
    {
        let mut g = Graph::empty(n);
        g.weighted = weighted;
        let mut seen = HashSet::new();
        for (u, v, w) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(GraphError::NodeOutOfRange { node: x, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if w == 0 {
                return Err(GraphError::ZeroWeight(u, v));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(GraphError::ParallelEdge(u, v));
            }
            let id = g.edges.len();
            g.edges.push(Edge { u, v, w });
            g.adj[u].push((v, id));
            g.adj[v].push((u, id));
        }
        Ok(g)
    }

    /// Same node set and labels, keeping only the listed edges.
    pub fn edge_subgraph(&self, keep: impl IntoIterator<Item = EdgeId>) -> Graph {
        let mut h = Graph::empty(self.n);
        h.labels = self.labels.clone();
        h.weighted = self.weighted;
        for id in keep {
            let e = self.edges[id];
            let nid = h.edges.len();
            h.edges.push(e);
            h.adj[e.u].push((e.v, nid));
            h.adj[e.v].push((e.u, nid));
        }
        h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Edge {
        self.edges[id]
    }

    /// `(neighbor, edge id)` pairs incident to `v`.
    pub fn neighbors(&self, v: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adj[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    pub fn min_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn weighted_degree(&self, v: NodeId) -> u64 {
        self.adj[v].iter().map(|&(_, e)| self.edges[e].w).sum()
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|e| e.w).sum()
    }

    pub fn label(&self, v: NodeId) -> u64 {
        self.labels[v]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    /// Number of bits needed to write any label of this graph.
    pub fn label_bits(&self) -> u32 {
        bit_len(self.labels.iter().copied().max().unwrap_or(0))
    }

    /// Node with the smallest label.
    pub fn min_label_node(&self) -> NodeId {
        (0..self.n).min_by_key(|&v| self.labels[v]).unwrap_or(0)
    }

    /// Replaces the identity labels with distinct random labels in `[n^c]`.
    pub fn with_random_labels(mut self, exponent: u32, seed: u64) -> Self {
        use rand::seq::index::sample;
        let space = (self.n as u64).saturating_pow(exponent).max(self.n as u64);
        let mut rng = crate::seed::rng(seed, 0x1abe1);
        self.labels = if space <= u32::MAX as u64 * 4 && space <= usize::MAX as u64 {
            sample(&mut rng, space as usize, self.n)
                .into_iter()
                .map(|x| x as u64)
                .collect()
        } else {
            let mut set = HashSet::new();
            let mut out = Vec::with_capacity(self.n);
            while out.len() < self.n {
                let x = rand::Rng::gen_range(&mut rng, 0..space);
                if set.insert(x) {
                    out.push(x);
                }
            }
            out
        };
        self
    }

    pub fn set_weights(&mut self, weights: &[u64]) -> Result<(), GraphError> {
        assert_eq!(weights.len(), self.edges.len());
        for (e, &w) in self.edges.iter_mut().zip(weights) {
            if w == 0 {
                return Err(GraphError::ZeroWeight(e.u, e.v));
            }
            e.w = w;
        }
        self.weighted = true;
        Ok(())
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        oracle::bfs_distances(self, 0)
            .iter()
            .all(|&d| d != u64::MAX)
    }

    /// Edge id joining `u` and `v`, if any.
    pub fn find_edge(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        let (a, b) = if self.adj[u].len() <= self.adj[v].len() {
            (u, v)
        } else {
            (v, u)
        };
        self.adj[a].iter().find(|&&(x, _)| x == b).map(|&(_, e)| e)
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            min_degree: self.min_degree(),
            edge_connectivity: exact_edge_connectivity(self),
            diameter: exact_diameter(self),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct GraphStats {
    pub min_degree: usize,
    pub edge_connectivity: usize,
    /// `None` when the graph is disconnected.
    pub diameter: Option<u64>,
}

impl GraphStats {
    /// Concrete form of the `D = O(n / delta)` bound: a shortest path of
    /// length `D` has `floor(D/3)` disjoint closed neighbourhoods.
    pub fn diameter_bound(n: usize, min_degree: usize) -> f64 {
        3.0 * n as f64 / min_degree.max(1) as f64 + 3.0
    }
}

/// Bits needed to represent `x` (at least 1).
pub fn bit_len(x: u64) -> u32 {
    (64 - x.leading_zeros()).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_loops_and_parallel_edges() {
        assert_eq!(
            Graph::from_edges(3, [(0, 0)]).unwrap_err(),
            GraphError::SelfLoop(0)
        );
        assert_eq!(
            Graph::from_edges(3, [(0, 1), (1, 0)]).unwrap_err(),
            GraphError::ParallelEdge(1, 0)
        );
        assert!(matches!(
            Graph::from_edges(2, [(0, 2)]),
            Err(GraphError::NodeOutOfRange { node: 2, n: 2 })
        ));
        assert_eq!(
            Graph::from_weighted_edges(2, [(0, 1, 0)], true).unwrap_err(),
            GraphError::ZeroWeight(0, 1)
        );
    }

    #[test]
    fn adjacency_is_symmetric() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        for (id, e) in g.edges().iter().enumerate() {
            assert!(g.neighbors(e.u).contains(&(e.v, id)));
            assert!(g.neighbors(e.v).contains(&(e.u, id)));
        }
        assert_eq!(g.find_edge(3, 0), Some(3));
        assert_eq!(g.find_edge(0, 2), None);
    }

    #[test]
    fn random_labels_are_distinct_and_bounded() {
        let g = generate(&GraphKind::Complete { n: 20 }, 0)
            .unwrap()
            .with_random_labels(3, 7);
        let set: HashSet<_> = g.labels().iter().collect();
        assert_eq!(set.len(), 20);
        assert!(g.labels().iter().all(|&l| l < 8000));
    }

    #[test]
    fn bit_len_edges() {
        assert_eq!(bit_len(0), 1);
        assert_eq!(bit_len(1), 1);
        assert_eq!(bit_len(255), 8);
        assert_eq!(bit_len(256), 9);
    }
}
