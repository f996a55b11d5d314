//! Distributed Baswana–Sen `(2r-1)`-spanner.
//!
//! Clusters start as singletons. In each of the first `r - 1` phases every
//! cluster is kept with probability `n^(-1/r)`; the coin is flipped by the
//! cluster center and passed down the cluster tree. Nodes of dropped
//! clusters then either join the adjacent kept cluster with the lightest
//! edge (adding that edge and every strictly lighter edge to other
//! clusters), or, without a kept neighbour, add their lightest edge to every
//! adjacent cluster and leave the game. A last phase adds, for every node,
//! the lightest edge to each adjacent cluster.
//!
//! Each phase costs the tree depth for the coin plus two exchange rounds:
//! `(cluster, kept)` on every live edge, then per-edge status bits
//! (dropped, adopted as tree child, added to the spanner). Edges are
//! compared by `(weight, smaller endpoint id, larger endpoint id)`.

use std::collections::BTreeMap;

use rand::Rng;

use super::ApspError;
use crate::graph::{bit_len, dijkstra, EdgeId, Graph, NodeId};
use crate::sim::{Network, NodeCtx, Outbox, Protocol, SimConfig, Token};

/// A subgraph of the input with its stretch parameter.
#[derive(Debug, Clone)]
pub struct Spanner {
    pub r: usize,
    /// Spanner edges as ids of the input graph, sorted.
    pub edges: Vec<EdgeId>,
    pub graph: Graph,
}

impl Spanner {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Largest `d_H(u,v) / d_G(u,v)` over all pairs, by Dijkstra from every
    /// node of both graphs. Infinite if `H` disconnects a pair.
    pub fn max_stretch(&self, g: &Graph) -> f64 {
        let mut worst: f64 = 1.0;
        for s in 0..g.n() {
            let dg = dijkstra(g, s);
            let dh = dijkstra(&self.graph, s);
            for v in 0..g.n() {
                if v == s || dg[v] == u64::MAX {
                    continue;
                }
                if dh[v] == u64::MAX {
                    return f64::INFINITY;
                }
                worst = worst.max(dh[v] as f64 / dg[v] as f64);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BsMsg {
    /// Cluster coin passed down the cluster tree.
    Coin(bool),
    /// Sender's cluster center and whether that cluster was kept.
    Cluster { center: u64, kept: bool },
    /// Status of the edge after the sender's decision.
    Status {
        dropped: bool,
        adopt: bool,
        added: bool,
    },
}

impl Token for BsMsg {
    fn bit_size(&self) -> u32 {
        2 + match *self {
            BsMsg::Coin(_) => 1,
            BsMsg::Cluster { center, .. } => bit_len(center) + 1,
            BsMsg::Status { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Coin,
    Exchange,
    Status,
}

/// Per-node Baswana–Sen state; the harness switches `stage` between
/// simulator runs and calls the local decision step in between.
#[derive(Debug, Clone)]
pub(crate) struct BsNode {
    label: u64,
    cluster: Option<u64>,
    tree_parent: Option<usize>,
    tree_children: Vec<usize>,
    alive: Vec<bool>,
    added: Vec<bool>,
    nb_added: Vec<bool>,
    nb_cluster: Vec<Option<u64>>,
    nb_kept: Vec<bool>,
    /// This node's cluster kept in the current phase.
    kept: Option<bool>,
    stage: Stage,
    /// Work due at the next send of the current stage.
    pending: bool,
    /// Ports that get a status message and what it says.
    status: Vec<(usize, BsMsg)>,
    keep_prob: f64,
}

impl BsNode {
    fn new(label: u64, degree: usize, keep_prob: f64) -> Self {
        BsNode {
            label,
            cluster: Some(label),
            tree_parent: None,
            tree_children: Vec::new(),
            alive: vec![true; degree],
            added: vec![false; degree],
            nb_added: vec![false; degree],
            nb_cluster: vec![None; degree],
            nb_kept: vec![false; degree],
            kept: None,
            stage: Stage::Coin,
            pending: false,
            status: Vec::new(),
            keep_prob,
        }
    }

    fn is_center(&self) -> bool {
        self.cluster == Some(self.label)
    }

    fn begin(&mut self, stage: Stage) {
        self.stage = stage;
        self.pending = match stage {
            Stage::Coin => {
                self.kept = None;
                self.is_center()
            }
            Stage::Exchange => self.alive.iter().any(|&a| a),
            Stage::Status => !self.status.is_empty(),
        };
    }

    /// Lightest live edge into each adjacent cluster: cluster -> (key, port).
    fn lightest(&self, ports: &[crate::sim::Port]) -> BTreeMap<u64, ((u64, u64, u64), usize)> {
        let mut best: BTreeMap<u64, ((u64, u64, u64), usize)> = BTreeMap::new();
        for (p, port) in ports.iter().enumerate() {
            if !self.alive[p] {
                continue;
            }
            let Some(c) = self.nb_cluster[p] else {
                continue;
            };
            let nb = port.neighbor;
            let key = (port.weight, self.label.min(nb), self.label.max(nb));
            best.entry(c)
                .and_modify(|cur| {
                    if key < cur.0 {
                        *cur = (key, p);
                    }
                })
                .or_insert((key, p));
        }
        best
    }

    /// Local step after the exchange of a sampling phase.
    fn decide(&mut self, ports: &[crate::sim::Port]) {
        let before = (self.alive.clone(), self.added.clone());
        let mut adopt = None;
        if self.cluster.is_some() && self.kept != Some(true) {
            let best = self.lightest(ports);
            let target = best
                .iter()
                .filter(|(_, &(_, p))| self.nb_kept[p])
                .min_by_key(|(_, &(key, _))| key)
                .map(|(&c, &(key, p))| (c, key, p));
            match target {
                None => {
                    for &(_, p) in best.values() {
                        self.added[p] = true;
                    }
                    for p in 0..self.alive.len() {
                        self.alive[p] = false;
                    }
                    self.cluster = None;
                }
                Some((c_star, key_star, p_star)) => {
                    self.added[p_star] = true;
                    adopt = Some(p_star);
                    let mut drop_clusters = vec![c_star];
                    for (&c, &(key, p)) in &best {
                        if key < key_star {
                            self.added[p] = true;
                            drop_clusters.push(c);
                        }
                    }
                    for p in 0..self.alive.len() {
                        if self.nb_cluster[p].is_some_and(|c| drop_clusters.contains(&c)) {
                            self.alive[p] = false;
                        }
                    }
                    self.cluster = Some(c_star);
                }
            }
            self.tree_parent = adopt;
            self.tree_children.clear();
        }
        self.queue_status(&before, adopt);
    }

    /// Local step after the exchange of the final phase.
    fn finish(&mut self, ports: &[crate::sim::Port]) {
        let before = (self.alive.clone(), self.added.clone());
        for &(_, p) in self.lightest(ports).values() {
            self.added[p] = true;
        }
        self.queue_status(&before, None);
    }

    /// Tells the other endpoint of every edge that changed in this phase.
    fn queue_status(&mut self, before: &(Vec<bool>, Vec<bool>), adopt: Option<usize>) {
        let (was_alive, was_added) = before;
        self.status = (0..was_alive.len())
            .filter(|&p| {
                was_alive[p]
                    && (!self.alive[p] || adopt == Some(p) || self.added[p] != was_added[p])
            })
            .map(|p| {
                (
                    p,
                    BsMsg::Status {
                        dropped: !self.alive[p],
                        adopt: adopt == Some(p),
                        added: self.added[p],
                    },
                )
            })
            .collect();
    }

    /// Ports whose edge this node reports as a spanner edge: it added the
    /// edge and the other endpoint either did not or has a larger id.
    fn owned(&self, ports: &[crate::sim::Port]) -> Vec<usize> {
        (0..self.added.len())
            .filter(|&p| self.added[p] && (!self.nb_added[p] || self.label < ports[p].neighbor))
            .collect()
    }
}

impl Protocol for BsNode {
    type Msg = BsMsg;

    fn send(&mut self, ctx: &mut NodeCtx<'_>, out: &mut Outbox<BsMsg>) {
        if !self.pending {
            return;
        }
        self.pending = false;
        match self.stage {
            Stage::Coin => {
                if self.kept.is_none() {
                    self.kept = Some(ctx.rng.gen_bool(self.keep_prob));
                }
                let coin = self.kept.unwrap();
                for &c in &self.tree_children {
                    out.send(c, BsMsg::Coin(coin));
                }
            }
            Stage::Exchange => {
                let msg = BsMsg::Cluster {
                    center: self.cluster.expect("live edges imply a cluster"),
                    kept: self.kept == Some(true),
                };
                for p in 0..self.alive.len() {
                    if self.alive[p] {
                        out.send(p, msg);
                    }
                }
            }
            Stage::Status => {
                for &(p, m) in &self.status {
                    out.send(p, m);
                }
                self.status.clear();
            }
        }
    }

    fn receive(&mut self, _ctx: &mut NodeCtx<'_>, inbox: &[(usize, BsMsg)]) {
        for &(p, m) in inbox {
            match m {
                BsMsg::Coin(b) => {
                    self.kept = Some(b);
                    self.pending = !self.tree_children.is_empty();
                }
                BsMsg::Cluster { center, kept } => {
                    self.nb_cluster[p] = Some(center);
                    self.nb_kept[p] = kept;
                    // Edges inside one cluster are never needed again.
                    if self.cluster == Some(center) {
                        self.alive[p] = false;
                    }
                }
                BsMsg::Status {
                    dropped,
                    adopt,
                    added,
                } => {
                    if dropped {
                        self.alive[p] = false;
                    }
                    if adopt {
                        self.tree_children.push(p);
                    }
                    self.nb_added[p] |= added;
                }
            }
        }
    }

    fn is_done(&self) -> bool {
        !self.pending
    }
}

/// Output of a distributed spanner run.
pub(crate) struct SpannerRun {
    pub spanner: Spanner,
    /// Per node, the ports of the spanner edges it is responsible for.
    pub owned: Vec<Vec<usize>>,
}

fn run_stage(
    net: &mut Network<'_>,
    nodes: &mut [BsNode],
    stage: Stage,
    phase: &str,
) -> Result<(), ApspError> {
    for node in nodes.iter_mut() {
        node.begin(stage);
    }
    net.run(phase, nodes)?;
    Ok(())
}

pub(crate) fn baswana_sen_on(net: &mut Network<'_>, r: usize) -> Result<SpannerRun, ApspError> {
    if r < 1 {
        return Err(ApspError::InvalidParameters(
            "spanner parameter r must be at least 1".into(),
        ));
    }
    let g = net.graph();
    let n = g.n();
    let keep_prob = (n.max(2) as f64).powf(-1.0 / r as f64);
    let mut nodes: Vec<BsNode> = (0..n)
        .map(|v| BsNode::new(g.label(v), g.degree(v), keep_prob))
        .collect();
    for phase in 1..r {
        run_stage(
            net,
            &mut nodes,
            Stage::Coin,
            &format!("spanner-coin-{phase}"),
        )?;
        run_stage(
            net,
            &mut nodes,
            Stage::Exchange,
            &format!("spanner-exchange-{phase}"),
        )?;
        for (v, node) in nodes.iter_mut().enumerate() {
            node.decide(net.ports(v));
        }
        run_stage(
            net,
            &mut nodes,
            Stage::Status,
            &format!("spanner-status-{phase}"),
        )?;
    }
    for node in nodes.iter_mut() {
        node.kept = None;
    }
    run_stage(net, &mut nodes, Stage::Exchange, "spanner-exchange-final")?;
    for (v, node) in nodes.iter_mut().enumerate() {
        node.finish(net.ports(v));
    }
    run_stage(net, &mut nodes, Stage::Status, "spanner-status-final")?;

    let mut owned = Vec::with_capacity(n);
    let mut edges = Vec::new();
    for (v, node) in nodes.iter().enumerate() {
        let ports = node.owned(net.ports(v));
        edges.extend(ports.iter().map(|&p| net.port_edge(v, p)));
        owned.push(ports);
    }
    edges.sort_unstable();
    let dup = edges.windows(2).any(|w| w[0] == w[1]);
    if dup {
        return Err(ApspError::Internal("a spanner edge has two owners".into()));
    }
    let graph = g.edge_subgraph(edges.iter().copied());
    Ok(SpannerRun {
        spanner: Spanner { r, edges, graph },
        owned,
    })
}

/// Builds a Baswana–Sen spanner on a fresh network; returns it with the
/// rounds used.
pub fn baswana_sen_spanner(
    g: &Graph,
    r: usize,
    sim: SimConfig,
    seed: u64,
) -> Result<(Spanner, u64), ApspError> {
    let mut net = Network::new(g, sim, seed);
    let run = baswana_sen_on(&mut net, r)?;
    Ok((run.spanner, net.rounds()))
}

/// Node ids of a spanner edge list, handy for tests and reports.
pub fn spanner_pairs(g: &Graph, sp: &Spanner) -> Vec<(NodeId, NodeId)> {
    sp.edges
        .iter()
        .map(|&e| (g.edge(e).u, g.edge(e).v))
        .collect()
}
