//! Random edge partition into low-diameter spanning subgraphs.
//!
//! Every edge is thrown into one of `lambda' = max(1, floor(lambda / (C ln n)))`
//! parts uniformly at random. With `lambda` the edge connectivity each part
//! is, with high probability, connected with hop diameter
//! `O((n log n) / delta)`. The assignment needs no communication: the part
//! of edge `{u, v}` is a hash of the run seed and both endpoint
//! identifiers, so either endpoint can compute it.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::broadcast::{run_bfs, BfsTree, BroadcastError};
use crate::graph::{exact_diameter, EdgeId, Graph, NodeId};
use crate::seed;
use crate::sim::{Network, SimConfig};

/// Default `C` in `p = C ln n / lambda`.
pub const DEFAULT_C: f64 = 2.0;
/// Default multiplier of `(n ln n) / delta` in the acceptance test for a part.
pub const DEFAULT_BOUND_CONST: f64 = 20.0;

#[derive(Debug, Error)]
pub enum PackingError {
    #[error("malformed partition: {0}")]
    Malformed(String),
    #[error("part {part} is not connected")]
    Disconnected { part: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Broadcast(#[from] BroadcastError),
}

/// `max(1, floor(lambda / (c ln n)))`.
pub fn part_count(lambda: usize, c: f64, n: usize) -> usize {
    let ln = (n.max(2) as f64).ln();
    ((lambda as f64 / (c * ln)).floor() as usize).max(1)
}

/// Part chosen for the edge between identifiers `a` and `b`. Symmetric in
/// `(a, b)`, so both endpoints agree without exchanging anything.
pub fn edge_part(seed: u64, a: u64, b: u64, parts: usize) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    let h = seed::derive(seed::derive(seed, lo), hi);
    seed::reduce(h, parts as u64) as usize
}

/// Keeps every edge independently with probability `p`.
pub fn sample_subgraph(g: &Graph, p: f64, seed: u64) -> Graph {
    assert!(
        p > 0.0 && p <= 1.0,
        "sampling probability must be in (0, 1]"
    );
    let mut rng = seed::rng(seed, 0x5a3b1e);
    let keep: Vec<EdgeId> = (0..g.m()).filter(|_| rng.gen_bool(p)).collect();
    g.edge_subgraph(keep)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgePartition {
    pub parts: Vec<Vec<EdgeId>>,
    pub part_of: Vec<usize>,
}

impl EdgePartition {
    pub fn from_assignment(part_of: Vec<usize>, parts: usize) -> Self {
        let mut lists = vec![Vec::new(); parts];
        for (e, &p) in part_of.iter().enumerate() {
            lists[p].push(e);
        }
        EdgePartition {
            parts: lists,
            part_of,
        }
    }

    pub fn single(g: &Graph) -> Self {
        Self::from_assignment(vec![0; g.m()], 1)
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Checks the partition is exhaustive, disjoint and self-consistent.
    pub fn validate(&self, g: &Graph) -> Result<(), PackingError> {
        if self.part_of.len() != g.m() {
            return Err(PackingError::Malformed(format!(
                "assignment covers {} edges, graph has {}",
                self.part_of.len(),
                g.m()
            )));
        }
        let mut seen = vec![false; g.m()];
        for (i, part) in self.parts.iter().enumerate() {
            for &e in part {
                if e >= g.m() {
                    return Err(PackingError::Malformed(format!(
                        "unknown edge {e} in part {i}"
                    )));
                }
                if std::mem::replace(&mut seen[e], true) {
                    return Err(PackingError::Malformed(format!("edge {e} appears twice")));
                }
                if self.part_of[e] != i {
                    return Err(PackingError::Malformed(format!(
                        "edge {e} listed in part {i} but assigned to {}",
                        self.part_of[e]
                    )));
                }
            }
        }
        if let Some(e) = seen.iter().position(|&s| !s) {
            return Err(PackingError::Malformed(format!("edge {e} is in no part")));
        }
        Ok(())
    }

    pub fn subgraph(&self, g: &Graph, part: usize) -> Graph {
        g.edge_subgraph(self.parts[part].iter().copied())
    }

    /// Part index of every port of every node.
    pub fn port_parts(&self, g: &Graph) -> Vec<Vec<usize>> {
        (0..g.n())
            .map(|v| {
                g.neighbors(v)
                    .iter()
                    .map(|&(_, e)| self.part_of[e])
                    .collect()
            })
            .collect()
    }
}

/// Random partition into `part_count(lambda, c, n)` parts.
pub fn partition(g: &Graph, lambda: usize, c: f64, seed: u64) -> EdgePartition {
    assert!(lambda >= 1 && c > 0.0);
    let parts = part_count(lambda, c, g.n());
    let part_of = g
        .edges()
        .iter()
        .map(|e| edge_part(seed, g.label(e.u), g.label(e.v), parts))
        .collect();
    EdgePartition::from_assignment(part_of, parts)
}

/// `bound_const * (n ln n) / delta`.
pub fn diameter_bound(g: &Graph, bound_const: f64) -> f64 {
    let n = g.n().max(2) as f64;
    bound_const * n * n.ln() / g.min_degree().max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartCheck {
    pub connected: bool,
    pub diameter: Option<u64>,
    pub bound: f64,
    pub within_bound: bool,
}

/// Exact connectivity and diameter of every part.
pub fn verify_packing(
    g: &Graph,
    part: &EdgePartition,
    bound_const: f64,
) -> Result<Vec<PartCheck>, PackingError> {
    part.validate(g)?;
    let bound = diameter_bound(g, bound_const);
    Ok((0..part.len())
        .map(|i| {
            let diameter = exact_diameter(&part.subgraph(g, i));
            PartCheck {
                connected: diameter.is_some(),
                diameter,
                bound,
                within_bound: diameter.is_some_and(|d| d as f64 <= bound),
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct TreePacking {
    pub partition: EdgePartition,
    pub port_parts: Vec<Vec<usize>>,
    pub trees: Vec<BfsTree>,
    pub subgraph_diameters: Vec<u64>,
    /// Simulator rounds spent building all trees in parallel.
    pub rounds: u64,
}

impl TreePacking {
    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.trees.first().map_or(0, |t| t.root)
    }
}

/// Runs one BFS per part simultaneously, rooted at the smallest identifier.
pub fn build_trees(
    g: &Graph,
    part: &EdgePartition,
    sim: SimConfig,
    seed: u64,
) -> Result<TreePacking, PackingError> {
    part.validate(g)?;
    let port_parts = part.port_parts(g);
    let root = g.min_label_node();
    let mut net = Network::new(g, sim, seed);
    let trees = match run_bfs(&mut net, &port_parts, part.len(), root, "trees") {
        Ok(t) => t,
        Err(BroadcastError::Unreached { part, .. }) => {
            return Err(PackingError::Disconnected { part })
        }
        Err(e) => return Err(e.into()),
    };
    let subgraph_diameters = (0..part.len())
        .map(|i| exact_diameter(&part.subgraph(g, i)).expect("BFS reached every node"))
        .collect();
    Ok(TreePacking {
        partition: part.clone(),
        port_parts,
        trees,
        subgraph_diameters,
        rounds: net.rounds(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GuessRecord {
    pub lambda_guess: usize,
    pub parts: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub lambda_guess: usize,
    pub partition: EdgePartition,
    pub guesses: Vec<GuessRecord>,
}

/// Tries `lambda~ = delta, delta/2, delta/4, ...` and keeps the first guess
/// whose partition has every part connected within the diameter bound.
pub fn exponential_search(
    g: &Graph,
    c: f64,
    bound_const: f64,
    seed: u64,
) -> Result<SearchOutcome, PackingError> {
    if !g.is_connected() || g.n() < 2 {
        return Err(PackingError::Config(
            "exponential search needs a connected graph with at least 2 nodes".into(),
        ));
    }
    let mut guess = g.min_degree();
    let mut guesses = Vec::new();
    loop {
        let part = partition(g, guess, c, seed::derive(seed, guess as u64));
        let parts = part.len();
        let ok = verify_packing(g, &part, bound_const)?
            .iter()
            .all(|p| p.within_bound);
        guesses.push(GuessRecord {
            lambda_guess: guess,
            parts,
            accepted: ok,
        });
        if ok {
            return Ok(SearchOutcome {
                lambda_guess: guess,
                partition: part,
                guesses,
            });
        }
        if parts == 1 {
            return Err(PackingError::Config(format!(
                "the whole graph exceeds the diameter bound; raise bound_const above {bound_const}"
            )));
        }
        guess = (guess / 2).max(1);
    }
}

/// Exponential search followed by one BFS tree per accepted part.
pub fn auto_packing(
    g: &Graph,
    c: f64,
    bound_const: f64,
    sim: SimConfig,
    seed: u64,
) -> Result<(SearchOutcome, TreePacking), PackingError> {
    let search = exponential_search(g, c, bound_const, seed)?;
    let packing = build_trees(g, &search.partition, sim, seed::derive(seed, 0x7ee5))?;
    Ok((search, packing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};

    fn gen(kind: GraphKind) -> Graph {
        generate(&kind, 1).unwrap()
    }

    #[test]
    fn part_count_matches_hand_arithmetic() {
        // 255 / (2 ln 256) = 255 / 11.0904 = 22.99
        assert_eq!(part_count(255, 2.0, 256), 22);
        // 64 / (2 ln 512) = 64 / 12.477 = 5.13
        assert_eq!(part_count(64, 2.0, 512), 5);
        assert_eq!(part_count(3, 2.0, 100), 1);
        assert_eq!(part_count(7, 2.0, 8), 1);
    }

    #[test]
    fn full_probability_keeps_everything() {
        let g = gen(GraphKind::Complete { n: 9 });
        assert_eq!(sample_subgraph(&g, 1.0, 5), g);
    }

    #[test]
    fn half_probability_on_one_edge_is_binomial() {
        // Bin(1000, 1/2) has sd 15.8; 500 +- 50 is beyond 3 sd.
        let g = gen(GraphKind::Path { n: 2 });
        let kept = (0..1000)
            .filter(|&s| sample_subgraph(&g, 0.5, s).m() == 1)
            .count();
        assert!((450..=550).contains(&kept), "kept {kept}");
    }

    #[test]
    fn single_part_is_whole_graph() {
        let g = gen(GraphKind::Circulant { n: 12, s: 2 });
        let p = partition(&g, 1, 2.0, 3);
        assert_eq!(p.len(), 1);
        assert_eq!(p.subgraph(&g, 0), g);
    }

    #[test]
    fn k4_two_parts_cover_all_edges() {
        let g = gen(GraphKind::Complete { n: 4 });
        for seed in 0..20 {
            let part_of = g
                .edges()
                .iter()
                .map(|e| edge_part(seed, e.u as u64, e.v as u64, 2))
                .collect();
            let p = EdgePartition::from_assignment(part_of, 2);
            p.validate(&g).unwrap();
            assert_eq!(p.parts.iter().map(Vec::len).sum::<usize>(), 6);
        }
    }

    #[test]
    fn endpoints_agree_without_communication() {
        let g = gen(GraphKind::Complete { n: 30 }).with_random_labels(3, 4);
        for seed in 0..10 {
            let p = partition(&g, 29, 0.5, seed);
            for (id, e) in g.edges().iter().enumerate() {
                let at_u = edge_part(seed, g.label(e.u), g.label(e.v), p.len());
                let at_v = edge_part(seed, g.label(e.v), g.label(e.u), p.len());
                assert_eq!(at_u, at_v);
                assert_eq!(at_u, p.part_of[id]);
            }
        }
    }

    #[test]
    fn validation_catches_malformed_partitions() {
        let g = gen(GraphKind::Complete { n: 4 });
        let mut p = EdgePartition::single(&g);
        p.parts[0].pop();
        assert!(matches!(p.validate(&g), Err(PackingError::Malformed(_))));
        let mut p = EdgePartition::single(&g);
        p.parts[0].push(0);
        assert!(matches!(p.validate(&g), Err(PackingError::Malformed(_))));
        let p = EdgePartition::from_assignment(vec![0; 5], 1);
        assert!(matches!(p.validate(&g), Err(PackingError::Malformed(_))));
    }

    #[test]
    fn verify_examples() {
        let k8 = gen(GraphKind::Complete { n: 8 });
        let checks = verify_packing(&k8, &EdgePartition::single(&k8), 20.0).unwrap();
        assert_eq!(checks.len(), 1);
        assert!(checks[0].connected && checks[0].within_bound);
        assert_eq!(checks[0].diameter, Some(1));

        let path = gen(GraphKind::Path { n: 6 });
        let alternating = EdgePartition::from_assignment((0..5).map(|e| e % 2).collect(), 2);
        let checks = verify_packing(&path, &alternating, 20.0).unwrap();
        assert!(checks.iter().any(|c| !c.connected));
    }

    #[test]
    fn trees_on_star_and_cycle() {
        let star = Graph::from_edges(5, (1..5).map(|v| (0, v))).unwrap();
        let tp = build_trees(
            &star,
            &EdgePartition::single(&star),
            SimConfig::default(),
            0,
        )
        .unwrap();
        assert_eq!(tp.trees[0].height(), 1);
        assert!(tp.rounds <= 3);

        let c6 = gen(GraphKind::Circulant { n: 6, s: 1 });
        let tp = build_trees(&c6, &EdgePartition::single(&c6), SimConfig::default(), 0).unwrap();
        assert_eq!(tp.trees[0].root, 0);
        assert!(tp.trees[0].diameter(&c6) <= 5);
        assert_eq!(tp.subgraph_diameters, vec![3]);
    }

    #[test]
    fn k4_split_into_two_hamiltonian_paths() {
        let g = gen(GraphKind::Complete { n: 4 });
        // Paths 1-0-2-3 and 0-3-1-2.
        let first = [(0, 1), (0, 2), (2, 3)];
        let part_of = g
            .edges()
            .iter()
            .map(|e| usize::from(!first.contains(&(e.u, e.v))))
            .collect();
        let p = EdgePartition::from_assignment(part_of, 2);
        let tp = build_trees(&g, &p, SimConfig::default(), 0).unwrap();
        assert_eq!(tp.len(), 2);
        for (i, t) in tp.trees.iter().enumerate() {
            assert_eq!(t.diameter(&g), 3, "part {i}");
            let tree_edges: Vec<_> = (0..4)
                .filter_map(|v| t.parent[v].map(|p| g.find_edge(v, p).unwrap()))
                .collect();
            assert!(tree_edges.iter().all(|&e| p.part_of[e] == i));
        }
    }

    #[test]
    fn disconnected_part_is_named() {
        let path = gen(GraphKind::Path { n: 4 });
        let p = EdgePartition::from_assignment(vec![0, 1, 0], 2);
        assert!(matches!(
            build_trees(&path, &p, SimConfig::default(), 0),
            Err(PackingError::Disconnected { .. })
        ));
    }

    #[test]
    fn search_on_small_graphs_falls_back_to_one_part() {
        let k8 = gen(GraphKind::Complete { n: 8 });
        let out = exponential_search(&k8, 2.0, 20.0, 1).unwrap();
        assert_eq!(out.partition.len(), 1);
        assert_eq!(out.guesses.len(), 1);

        let path = gen(GraphKind::Path { n: 9 });
        let out = exponential_search(&path, 2.0, 20.0, 1).unwrap();
        assert_eq!(out.partition.len(), 1);
        assert_eq!(out.partition.subgraph(&path, 0), path);
    }

    #[test]
    fn search_bounded_guess_count() {
        let g = gen(GraphKind::RandomRegular { n: 128, d: 40 });
        let out = exponential_search(&g, 1.0, 20.0, 2).unwrap();
        let delta = g.min_degree() as f64;
        assert!(out.guesses.len() <= delta.log2().ceil() as usize + 1);
        assert!(out.guesses.last().unwrap().accepted);
    }

    #[test]
    fn tiny_bound_const_is_a_configuration_error() {
        let path = gen(GraphKind::Path { n: 30 });
        assert!(matches!(
            exponential_search(&path, 2.0, 0.01, 0),
            Err(PackingError::Config(_))
        ));
    }
}
