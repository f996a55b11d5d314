//! Exact, centralised reference computations. Slow by design of the
//! problem (all-pairs, all-cuts), never by accident.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use super::{Graph, GraphError, NodeId};

pub const MAX_CUT_ENUMERATION_NODES: usize = 20;

/// Hop distances from `src`; unreachable nodes get `u64::MAX`.
pub(crate) fn bfs_distances(g: &Graph, src: NodeId) -> Vec<u64> {
    let mut dist = vec![u64::MAX; g.n()];
    let mut queue = VecDeque::new();
    dist[src] = 0;
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        for &(v, _) in g.neighbors(u) {
            if dist[v] == u64::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

pub(crate) fn dijkstra(g: &Graph, src: NodeId) -> Vec<u64> {
    let mut dist = vec![u64::MAX; g.n()];
    let mut heap = BinaryHeap::new();
    dist[src] = 0;
    heap.push(Reverse((0u64, src)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, e) in g.neighbors(u) {
            let nd = d + g.edge(e).w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    dist
}

/// Eccentricity of `v` in hops, `None` if some node is unreachable.
pub fn eccentricity(g: &Graph, v: NodeId) -> Option<u64> {
    let d = bfs_distances(g, v);
    if d.contains(&u64::MAX) {
        None
    } else {
        d.into_iter().max()
    }
}

/// Hop diameter by BFS from every node; `None` for a disconnected graph.
pub fn exact_diameter(g: &Graph) -> Option<u64> {
    let mut best = 0;
    for v in 0..g.n() {
        best = best.max(eccentricity(g, v)?);
    }
    Some(best)
}

/// Dense `n x n` distance matrix. `u64::MAX` marks "unreachable".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceTable {
    n: usize,
    data: Vec<u64>,
}

impl DistanceTable {
    pub fn new(n: usize, fill: u64) -> Self {
        DistanceTable {
            n,
            data: vec![fill; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, u: NodeId, v: NodeId) -> u64 {
        self.data[u * self.n + v]
    }

    pub fn set(&mut self, u: NodeId, v: NodeId, d: u64) {
        self.data[u * self.n + v] = d;
    }

    pub fn row(&self, u: NodeId) -> &[u64] {
        &self.data[u * self.n..(u + 1) * self.n]
    }

    pub fn set_row(&mut self, u: NodeId, row: &[u64]) {
        self.data[u * self.n..(u + 1) * self.n].copy_from_slice(row);
    }
}

/// Exact all-pairs distances: BFS per source, or Dijkstra when `weighted`.
pub fn oracle_apsp(g: &Graph, weighted: bool) -> DistanceTable {
    let mut t = DistanceTable::new(g.n(), u64::MAX);
    for s in 0..g.n() {
        let row = if weighted {
            dijkstra(g, s)
        } else {
            bfs_distances(g, s)
        };
        t.set_row(s, &row);
    }
    t
}

/// Dinic's algorithm on the unit-capacity bidirected version of `g`.
struct UnitFlow {
    head: Vec<usize>,
    // arc i and i^1 are mates
    to: Vec<usize>,
    cap: Vec<u32>,
    next: Vec<usize>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

const NIL: usize = usize::MAX;

impl UnitFlow {
    fn new(g: &Graph) -> Self {
        let n = g.n();
        let mut f = UnitFlow {
            head: vec![NIL; n],
            to: Vec::with_capacity(2 * g.m()),
            cap: Vec::with_capacity(2 * g.m()),
            next: Vec::with_capacity(2 * g.m()),
            level: vec![0; n],
            iter: vec![0; n],
        };
        for e in g.edges() {
            f.arc(e.u, e.v);
            f.arc(e.v, e.u);
        }
        f
    }

    fn arc(&mut self, u: usize, v: usize) {
        self.to.push(v);
        self.cap.push(1);
        self.next.push(self.head[u]);
        self.head[u] = self.to.len() - 1;
    }

    fn reset(&mut self) {
        self.cap.iter_mut().for_each(|c| *c = 1);
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        let mut q = VecDeque::new();
        self.level[s] = 0;
        q.push_back(s);
        while let Some(u) = q.pop_front() {
            let mut a = self.head[u];
            while a != NIL {
                let v = self.to[a];
                if self.cap[a] > 0 && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    q.push_back(v);
                }
                a = self.next[a];
            }
        }
    }

    fn dfs(&mut self, u: usize, t: usize) -> bool {
        if u == t {
            return true;
        }
        while self.iter[u] != NIL {
            let a = self.iter[u];
            let v = self.to[a];
            if self.cap[a] > 0 && self.level[v] == self.level[u] + 1 && self.dfs(v, t) {
                self.cap[a] -= 1;
                self.cap[a ^ 1] += 1;
                return true;
            }
            self.iter[u] = self.next[a];
        }
        false
    }

    /// Max flow from `s` to `t`, stopping early once it reaches `limit`.
    fn max_flow(&mut self, s: usize, t: usize, limit: usize) -> usize {
        self.reset();
        let mut flow = 0;
        while flow < limit {
            self.bfs(s);
            if self.level[t] < 0 {
                break;
            }
            self.iter.copy_from_slice(&self.head);
            while flow < limit && self.dfs(s, t) {
                flow += 1;
            }
        }
        flow
    }

    fn reachable(&mut self, s: usize) -> Vec<bool> {
        self.bfs(s);
        self.level.iter().map(|&l| l >= 0).collect()
    }
}

/// Global minimum cut of the unweighted graph (its edge connectivity),
/// computed as `min_t maxflow(0, t)` over the `n - 1` sinks.
/// Returns 0 for a disconnected graph.
pub fn exact_edge_connectivity(g: &Graph) -> usize {
    min_cut_side(g).0
}

/// Edge connectivity together with one side of a minimum cut; the side
/// never contains node 0.
pub fn min_cut_side(g: &Graph) -> (usize, Vec<NodeId>) {
    let n = g.n();
    if n < 2 {
        return (0, Vec::new());
    }
    if !g.is_connected() {
        let dist = bfs_distances(g, 0);
        let side = (0..n).filter(|&v| dist[v] == u64::MAX).collect();
        return (0, side);
    }
    let mut flow = UnitFlow::new(g);
    // The trivial cut around a minimum-degree node is the starting bound;
    // a flow strictly below the cap is a true maximum flow.
    let mut best = g.min_degree();
    let mut best_t = None;
    for t in 1..n {
        let f = flow.max_flow(0, t, best);
        if f < best {
            best = f;
            best_t = Some(t);
        }
    }
    let side = match best_t {
        Some(t) => {
            flow.max_flow(0, t, best);
            let reach = flow.reachable(0);
            (0..n).filter(|&v| !reach[v]).collect()
        }
        None => {
            let v = (0..n).min_by_key(|&v| g.degree(v)).unwrap();
            if v == 0 {
                (1..n).collect()
            } else {
                vec![v]
            }
        }
    };
    (best, side)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutRecord {
    /// Bit `v` set iff node `v` is on the side containing node 0.
    pub subset: u32,
    pub value: u64,
}

impl CutRecord {
    pub fn contains(&self, v: NodeId) -> bool {
        self.subset >> v & 1 == 1
    }

    pub fn members(&self, n: usize) -> Vec<NodeId> {
        (0..n).filter(|&v| self.contains(v)).collect()
    }
}

/// All `2^(n-1) - 1` proper cuts `S` with `0 in S`, with exact weights.
pub fn enumerate_cuts(g: &Graph) -> Result<Vec<CutRecord>, GraphError> {
    let n = g.n();
    if n > MAX_CUT_ENUMERATION_NODES {
        return Err(GraphError::TooLargeForEnumeration {
            n,
            max: MAX_CUT_ENUMERATION_NODES,
        });
    }
    if n < 2 {
        return Ok(Vec::new());
    }
    let full = (1u32 << n) - 1;
    let mut out = Vec::with_capacity((1usize << (n - 1)) - 1);
    for rest in 0..(1u32 << (n - 1)) {
        let subset = (rest << 1) | 1;
        if subset == full {
            continue;
        }
        out.push(CutRecord {
            subset,
            value: cut_value(g, subset),
        });
    }
    Ok(out)
}

pub(crate) fn cut_value(g: &Graph, subset: u32) -> u64 {
    g.edges()
        .iter()
        .filter(|e| (subset >> e.u & 1) != (subset >> e.v & 1))
        .map(|e| e.w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};

    fn k(n: usize) -> Graph {
        generate(&GraphKind::Complete { n }, 0).unwrap()
    }

    fn path(n: usize) -> Graph {
        generate(&GraphKind::Path { n }, 0).unwrap()
    }

    fn q3() -> Graph {
        generate(&GraphKind::Hypercube { dim: 3 }, 0).unwrap()
    }

    #[test]
    fn connectivity_examples() {
        assert_eq!(exact_edge_connectivity(&k(4)), 3);
        assert_eq!(exact_edge_connectivity(&path(3)), 1);
        assert_eq!(exact_edge_connectivity(&q3()), 3);
        let bb = generate(&GraphKind::Barbell { k: 5 }, 0).unwrap();
        let (lambda, side) = min_cut_side(&bb);
        assert_eq!(lambda, 1);
        assert_eq!(side, vec![5, 6, 7, 8, 9]);
        let split = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(exact_edge_connectivity(&split), 0);
    }

    #[test]
    fn max_flow_agrees_with_exhaustive_cuts() {
        // Independent check: the minimum over all enumerated cuts.
        let mut graphs = vec![q3(), k(6), path(5)];
        for s in 0..5 {
            graphs.push(generate(&GraphKind::RandomRegular { n: 10, d: 3 }, s).unwrap());
            graphs.push(generate(&GraphKind::Circulant { n: 11, s: 2 }, s).unwrap());
        }
        for g in &graphs {
            let brute = enumerate_cuts(g)
                .unwrap()
                .iter()
                .map(|c| c.value)
                .min()
                .unwrap();
            assert_eq!(exact_edge_connectivity(g) as u64, brute);
            let (lambda, side) = min_cut_side(g);
            let mask = (0..g.n())
                .filter(|v| !side.contains(v))
                .fold(0u32, |m, v| m | 1 << v);
            assert_eq!(cut_value(g, mask), lambda as u64);
        }
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(exact_diameter(&k(4)), Some(1));
        assert_eq!(exact_diameter(&path(5)), Some(4));
        assert_eq!(exact_diameter(&q3()), Some(3));
        let split = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(exact_diameter(&split), None);
    }

    #[test]
    fn apsp_examples() {
        let tri = k(3);
        let d = oracle_apsp(&tri, false);
        for u in 0..3 {
            for v in 0..3 {
                assert_eq!(d.get(u, v), u64::from(u != v));
            }
        }
        assert_eq!(oracle_apsp(&path(3), false).get(0, 2), 2);
        let wt = Graph::from_weighted_edges(3, [(0, 1, 1), (1, 2, 1), (0, 2, 5)], true).unwrap();
        assert_eq!(oracle_apsp(&wt, true).get(0, 2), 2);
        assert_eq!(oracle_apsp(&wt, false).get(0, 2), 1);
    }

    #[test]
    fn cut_examples() {
        let tri = enumerate_cuts(&k(3)).unwrap();
        assert_eq!(tri.len(), 3);
        for c in tri.iter().filter(|c| c.subset.count_ones() == 1) {
            assert_eq!(c.value, 2);
        }
        let p = enumerate_cuts(&path(3)).unwrap();
        let by = |s: u32| p.iter().find(|c| c.subset == s).unwrap().value;
        assert_eq!(by(0b001), 1);
        assert_eq!(by(0b101), 2);
        let k4 = enumerate_cuts(&k(4)).unwrap();
        assert_eq!(k4.len(), 7);
        for c in &k4 {
            let side = c.subset.count_ones().min(4 - c.subset.count_ones());
            assert_eq!(c.value, if side == 1 { 3 } else { 4 });
        }
        assert!(matches!(
            enumerate_cuts(&k(21)),
            Err(GraphError::TooLargeForEnumeration { n: 21, .. })
        ));
    }

    #[test]
    fn singleton_cuts_equal_weighted_degree() {
        let g = crate::graph::with_random_weights(&k(7), 50, 9).unwrap();
        let cuts = enumerate_cuts(&g).unwrap();
        // {0} appears directly; {v} for v != 0 appears as its complement.
        let full = (1u32 << 7) - 1;
        for v in 0..7 {
            let target = if v == 0 { 1 } else { full & !(1 << v) };
            let c = cuts.iter().find(|c| c.subset == target).unwrap();
            assert_eq!(c.value, g.weighted_degree(v));
        }
    }
}
