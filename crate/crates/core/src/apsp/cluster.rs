//! Cluster sampling and the exact APSP computation on the cluster graph.
//!
//! Every node becomes a center with probability `min(1, c ln n / delta)`;
//! every other node joins its smallest-identifier sampled neighbour. The
//! cluster graph `G_c` has the centers as nodes and an edge between two
//! centers whenever some edge of `G` joins their clusters.
//!
//! APSP on `G_c` is solved distributedly in four stages on the original
//! network:
//!
//! 1. `cluster-exchange`: every node tells its neighbours its center.
//! 2. `cluster-gather`: members report the foreign centers they see to
//!    their own center, pipelined over the membership edge.
//! 3. `cluster-dfs`: a token walks a DFS of `G_c`; every center records the
//!    step `pi` at which it is first visited and announces itself as
//!    visited to its `G_c` neighbours before the token moves on.
//! 4. `cluster-bfs`: every center starts a BFS of `G_c` at virtual time
//!    `2 pi`. A virtual round is three real rounds: center to members,
//!    members across cluster boundaries, receivers to their own center.
//!
//! In stage 4 a member only forwards tokens whose source its center does
//! not know yet; the start delays guarantee at most one such source per
//! member and center per virtual round. Any excess is counted as a
//! collision and reported.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::Rng;
use serde::Serialize;

use super::ApspError;
use crate::graph::{bit_len, oracle_apsp, DistanceTable, Graph, NodeId};
use crate::seed;
use crate::sim::{Network, NodeCtx, Outbox, Protocol, SimConfig, Token};

const SAMPLE_STREAM: u64 = 0xc157;

/// Centers and the center `s(v)` of every node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterAssignment {
    /// Sampling probability used.
    pub p: f64,
    /// Sampled nodes in increasing index order.
    pub centers: Vec<NodeId>,
    /// `s[v]`: the center of `v` (`v` itself for a center).
    pub s: Vec<NodeId>,
}

impl ClusterAssignment {
    pub fn center_count(&self) -> usize {
        self.centers.len()
    }

    pub fn is_center(&self, v: NodeId) -> bool {
        self.s[v] == v
    }

    /// Position of `v` in `centers`, if it is one.
    pub fn center_index(&self, v: NodeId) -> Option<usize> {
        self.centers.binary_search(&v).ok()
    }

    /// Members of each cluster, indexed like `centers`.
    pub fn clusters(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.centers.len()];
        for (v, &c) in self.s.iter().enumerate() {
            out[self.center_index(c).expect("s maps to centers")].push(v);
        }
        out
    }

    /// Checks the assignment against `g`: centers map to themselves and
    /// every other node maps to an adjacent center.
    pub fn validate(&self, g: &Graph) -> Result<(), ApspError> {
        if self.s.len() != g.n() {
            return Err(ApspError::InvalidParameters(format!(
                "assignment covers {} nodes, graph has {}",
                self.s.len(),
                g.n()
            )));
        }
        for v in 0..g.n() {
            let c = self.s[v];
            let ok = if self.center_index(v).is_some() {
                c == v
            } else {
                self.center_index(c).is_some() && g.find_edge(v, c).is_some()
            };
            if !ok {
                return Err(ApspError::Coverage { node: v });
            }
        }
        Ok(())
    }
}

/// `min(1, c ln n / delta)`.
pub fn center_probability(g: &Graph, c: f64) -> f64 {
    let ln = (g.n().max(2) as f64).ln();
    (c * ln / g.min_degree().max(1) as f64).min(1.0)
}

/// Samples centers with each node's private coin and lets every other node
/// pick its smallest-identifier sampled neighbour. The neighbour choice is
/// what a one-round "I am a center" announcement yields; it is computed
/// here directly and charged as one round by [`cluster_apsp`].
pub fn sample_clusters(g: &Graph, c: f64, seed: u64) -> Result<ClusterAssignment, ApspError> {
    if !c.is_finite() || c <= 0.0 {
        return Err(ApspError::InvalidParameters(format!(
            "cluster constant must be positive, got {c}"
        )));
    }
    if g.n() < 2 || g.min_degree() == 0 {
        return Err(ApspError::InvalidParameters(
            "cluster sampling needs minimum degree at least 1".into(),
        ));
    }
    let p = center_probability(g, c);
    let base = seed::derive(seed, SAMPLE_STREAM);
    let sampled: Vec<bool> = (0..g.n())
        .map(|v| seed::rng(base, v as u64).gen_bool(p))
        .collect();
    let mut s = Vec::with_capacity(g.n());
    for v in 0..g.n() {
        if sampled[v] {
            s.push(v);
            continue;
        }
        let pick = g
            .neighbors(v)
            .iter()
            .map(|&(u, _)| u)
            .filter(|&u| sampled[u])
            .min_by_key(|&u| g.label(u));
        match pick {
            Some(u) => s.push(u),
            None => return Err(ApspError::Coverage { node: v }),
        }
    }
    let centers = (0..g.n()).filter(|&v| sampled[v]).collect();
    Ok(ClusterAssignment { p, centers, s })
}

/// The virtual graph over the centers, materialised for checking.
#[derive(Debug, Clone)]
pub struct ClusterGraph {
    pub centers: Vec<NodeId>,
    /// Adjacency over indices into `centers`, sorted.
    pub adj: Vec<Vec<usize>>,
}

impl ClusterGraph {
    pub fn build(g: &Graph, clus: &ClusterAssignment) -> Self {
        let k = clus.centers.len();
        let mut sets = vec![BTreeSet::new(); k];
        for e in g.edges() {
            let a = clus.center_index(clus.s[e.u]).expect("valid assignment");
            let b = clus.center_index(clus.s[e.v]).expect("valid assignment");
            if a != b {
                sets[a].insert(b);
                sets[b].insert(a);
            }
        }
        ClusterGraph {
            centers: clus.centers.clone(),
            adj: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn to_graph(&self) -> Graph {
        let edges = self
            .adj
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().filter(move |&&b| a < b).map(move |&b| (a, b)));
        Graph::from_edges(self.len(), edges).expect("adjacency built without duplicates")
    }

    /// Oracle hop distances between centers (by center index).
    pub fn distances(&self) -> DistanceTable {
        oracle_apsp(&self.to_graph(), false)
    }
}

/// Result of [`cluster_apsp`].
#[derive(Debug, Clone)]
pub struct ClusterApsp {
    /// Distances between centers by center index, as learned by the
    /// centers themselves.
    pub table: DistanceTable,
    /// DFS timestamps by center index.
    pub pi: Vec<u64>,
    /// Virtual rounds of the delayed-BFS stage.
    pub virtual_rounds: u64,
    /// Excess new tokens seen at a member or center in one virtual round.
    pub collisions: u64,
    /// Whether `table` equals the oracle BFS on the materialised `G_c`.
    pub matches_oracle: bool,
}

/// Small tokens used by the cluster stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ClusterMsg {
    /// Identifier of a center.
    Center(u64),
    /// A center announcing it has been visited.
    Visited(u64),
    /// The DFS token; `peer` is the target (when handed to a relay by its
    /// center) or the sender (everywhere else).
    Dfs { peer: u64, step: u64 },
    /// A BFS token: source center and its distance from the sending center.
    Bfs { source: u64, dist: u64 },
}

impl Token for ClusterMsg {
    fn bit_size(&self) -> u32 {
        2 + match *self {
            ClusterMsg::Center(c) | ClusterMsg::Visited(c) => bit_len(c),
            ClusterMsg::Dfs { peer, step } => bit_len(peer) + bit_len(step),
            ClusterMsg::Bfs { source, dist } => bit_len(source) + bit_len(dist),
        }
    }
}

/// Per-node knowledge shared by the cluster stages.
#[derive(Debug, Clone)]
pub(crate) struct Local {
    pub label: u64,
    /// Identifier of this node's center.
    pub center: u64,
    /// Port towards the center; `None` at a center.
    pub center_port: Option<usize>,
    /// Center identifier of the neighbour behind each port.
    pub nb_center: Vec<u64>,
}

impl Local {
    fn is_center(&self) -> bool {
        self.center_port.is_none()
    }

    fn cross_ports(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nb_center.len()).filter(|&p| self.nb_center[p] != self.center)
    }

    /// Smallest port leading into the cluster of `c`.
    fn port_into(&self, c: u64) -> Option<usize> {
        self.nb_center.iter().position(|&x| x == c)
    }
}

/// Stage 1: one round in which every node sends its center to everyone.
struct ExchangeNode {
    center: u64,
    sent: bool,
    got: Vec<u64>,
}

impl Protocol for ExchangeNode {
    type Msg = ClusterMsg;

    fn send(&mut self, _ctx: &mut NodeCtx<'_>, out: &mut Outbox<ClusterMsg>) {
        if !self.sent {
            out.send_all(ClusterMsg::Center(self.center));
            self.sent = true;
        }
    }

    fn receive(&mut self, _ctx: &mut NodeCtx<'_>, inbox: &[(usize, ClusterMsg)]) {
        for &(p, m) in inbox {
            if let ClusterMsg::Center(c) = m {
                self.got[p] = c;
            }
        }
    }

    fn is_done(&self) -> bool {
        self.sent
    }
}

/// How a center reaches a neighbouring cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Relay {
    /// Through its own cross edge on this port.
    Direct(usize),
    /// Through the member behind this port.
    Via(usize),
}

/// Stage 2: members stream the foreign centers they see to their center.
struct GatherNode {
    up: VecDeque<u64>,
    center_port: Option<usize>,
    /// At a center: foreign center -> relay.
    relay: BTreeMap<u64, Relay>,
}

impl Protocol for GatherNode {
    type Msg = ClusterMsg;

    fn send(&mut self, _ctx: &mut NodeCtx<'_>, out: &mut Outbox<ClusterMsg>) {
        if let Some(cp) = self.center_port {
            if let Some(c) = self.up.pop_front() {
                out.send(cp, ClusterMsg::Center(c));
            }
        }
    }

    fn receive(&mut self, _ctx: &mut NodeCtx<'_>, inbox: &[(usize, ClusterMsg)]) {
        for &(p, m) in inbox {
            if let ClusterMsg::Center(c) = m {
                self.relay.entry(c).or_insert(Relay::Via(p));
            }
        }
    }

    fn is_done(&self) -> bool {
        self.up.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DfsState {
    Idle,
    /// First visit: announce at the next send.
    Announce {
        step: u64,
    },
    /// Waiting for the announcement to land before moving on.
    Wait {
        until: u64,
        step: u64,
    },
    /// Move the token at the next send.
    Move {
        step: u64,
    },
}

/// Stage 3: DFS token walk over `G_c`.
struct DfsNode {
    local: Local,
    /// Center only.
    relay: BTreeMap<u64, Relay>,
    visited: BTreeSet<u64>,
    pi: Option<u64>,
    parent: Option<u64>,
    is_root: bool,
    state: DfsState,
    outq: Vec<(usize, ClusterMsg)>,
    last_visited_forwarded: Option<u64>,
}

impl DfsNode {
    fn arrive(&mut self, from: Option<u64>, step: u64) {
        if self.pi.is_none() {
            self.pi = Some(step);
            self.parent = from;
            self.visited.insert(self.local.label);
            if let Some(f) = from {
                self.visited.insert(f);
            }
            self.state = if self.relay.is_empty() {
                // A lone center has nobody to tell.
                DfsState::Move { step }
            } else {
                DfsState::Announce { step }
            };
        } else {
            self.state = DfsState::Move { step };
        }
    }

    fn hand_token(&self, target: u64, step: u64, out: &mut Outbox<ClusterMsg>) {
        match self.relay[&target] {
            Relay::Direct(p) => out.send(
                p,
                ClusterMsg::Dfs {
                    peer: self.local.label,
                    step,
                },
            ),
            Relay::Via(p) => out.send(p, ClusterMsg::Dfs { peer: target, step }),
        }
    }
}

impl Protocol for DfsNode {
    type Msg = ClusterMsg;

    fn send(&mut self, ctx: &mut NodeCtx<'_>, out: &mut Outbox<ClusterMsg>) {
        for (p, m) in self.outq.drain(..) {
            out.send(p, m);
        }
        if self.is_root && self.pi.is_none() {
            self.arrive(None, 0);
        }
        match self.state {
            DfsState::Idle => {}
            DfsState::Announce { step } => {
                out.send_all(ClusterMsg::Visited(self.local.label));
                // Members relay in the next round, receivers hand it to
                // their center in the round after.
                self.state = DfsState::Wait {
                    until: ctx.round + 3,
                    step,
                };
            }
            DfsState::Wait { until, step } => {
                if ctx.round >= until {
                    self.state = DfsState::Move { step };
                }
            }
            DfsState::Move { .. } => {}
        }
        if let DfsState::Move { step } = self.state {
            let next = self
                .relay
                .keys()
                .copied()
                .find(|c| !self.visited.contains(c));
            // Nothing left at the root means the walk is over.
            if let Some(target) = next.or(self.parent) {
                self.visited.insert(target);
                self.hand_token(target, step + 1, out);
            }
            self.state = DfsState::Idle;
        }
    }

    fn receive(&mut self, _ctx: &mut NodeCtx<'_>, inbox: &[(usize, ClusterMsg)]) {
        let local = &self.local;
        if local.is_center() {
            for &(_, m) in inbox {
                match m {
                    ClusterMsg::Visited(c) => {
                        self.visited.insert(c);
                    }
                    ClusterMsg::Dfs { peer, step } => self.arrive(Some(peer), step),
                    _ => {}
                }
            }
            return;
        }
        for &(p, m) in inbox {
            let from_center = Some(p) == local.center_port;
            match (from_center, m) {
                (true, ClusterMsg::Visited(c)) => {
                    for q in local.cross_ports() {
                        self.outq.push((q, ClusterMsg::Visited(c)));
                    }
                }
                (true, ClusterMsg::Dfs { peer, step }) => {
                    let q = local
                        .port_into(peer)
                        .expect("relay chosen for a visible cluster");
                    self.outq.push((
                        q,
                        ClusterMsg::Dfs {
                            peer: local.center,
                            step,
                        },
                    ));
                }
                (false, ClusterMsg::Visited(c)) => {
                    if self.last_visited_forwarded != Some(c) {
                        self.last_visited_forwarded = Some(c);
                        self.outq
                            .push((local.center_port.unwrap(), ClusterMsg::Visited(c)));
                    }
                }
                (false, ClusterMsg::Dfs { peer, step }) => {
                    self.outq
                        .push((local.center_port.unwrap(), ClusterMsg::Dfs { peer, step }));
                }
                _ => {}
            }
        }
    }

    fn is_done(&self) -> bool {
        self.outq.is_empty() && self.state == DfsState::Idle && !(self.is_root && self.pi.is_none())
    }
}

/// Stage 4: delayed BFS from every center, three real rounds per virtual
/// round.
struct BfsNode {
    local: Local,
    /// Center: its start time `2 pi`. Members: unused.
    start: Option<u64>,
    started: bool,
    /// Center: source -> distance. Member: sources its center knows.
    known: HashMap<u64, u64>,
    /// Center: token learned in the previous virtual round, to announce.
    fresh: Option<(u64, u64)>,
    /// Member: token from the center to push across the boundary.
    held: Option<(u64, u64)>,
    /// Member: new token to hand to the center.
    forward: Option<(u64, u64)>,
    /// Center: new tokens of the current virtual round.
    arrivals: BTreeMap<u64, u64>,
    collisions: u64,
    last_virtual: u64,
}

fn virtual_step(round: u64) -> (u64, u64) {
    ((round - 1) / 3 + 1, (round - 1) % 3 + 1)
}

impl BfsNode {
    /// Center: fold this virtual round's arrivals into the table.
    fn settle(&mut self, t: u64) {
        let arrivals = std::mem::take(&mut self.arrivals);
        let own_start = self.start == Some(t) && !self.started;
        let distinct = arrivals.len() as u64 + u64::from(own_start);
        if distinct > 1 {
            self.collisions += distinct - 1;
        }
        if own_start {
            self.started = true;
            self.known.insert(self.local.label, 0);
            self.fresh = Some((self.local.label, 0));
        }
        for (source, dist) in arrivals {
            self.known.insert(source, dist);
            // Only one token can be announced per virtual round; extra ones
            // were counted above and are still recorded locally.
            self.fresh.get_or_insert((source, dist));
        }
        self.last_virtual = t;
    }
}

impl Protocol for BfsNode {
    type Msg = ClusterMsg;

    fn send(&mut self, ctx: &mut NodeCtx<'_>, out: &mut Outbox<ClusterMsg>) {
        let (_, step) = virtual_step(ctx.round);
        // A start at virtual time 0 happens before round 1.
        if step == 1 && self.start == Some(0) && !self.started {
            self.settle(0);
        }
        let local = &self.local;
        if local.is_center() {
            if step == 1 {
                if let Some((source, dist)) = self.fresh.take() {
                    let msg = ClusterMsg::Bfs { source, dist };
                    for p in 0..local.nb_center.len() {
                        if local.nb_center[p] == local.label {
                            out.send(p, msg);
                        }
                    }
                    self.held = Some((source, dist));
                }
            } else if step == 2 {
                if let Some((source, dist)) = self.held.take() {
                    for q in local.cross_ports() {
                        out.send(q, ClusterMsg::Bfs { source, dist });
                    }
                }
            }
            return;
        }
        match step {
            2 => {
                if let Some((source, dist)) = self.held.take() {
                    for q in local.cross_ports() {
                        out.send(q, ClusterMsg::Bfs { source, dist });
                    }
                }
            }
            3 => {
                if let Some((source, dist)) = self.forward.take() {
                    out.send(local.center_port.unwrap(), ClusterMsg::Bfs { source, dist });
                }
            }
            _ => {}
        }
    }

    fn receive(&mut self, ctx: &mut NodeCtx<'_>, inbox: &[(usize, ClusterMsg)]) {
        let (t, step) = virtual_step(ctx.round);
        if self.local.is_center() {
            for &(_, m) in inbox {
                if let ClusterMsg::Bfs { source, dist } = m {
                    if !self.known.contains_key(&source) {
                        let e = self.arrivals.entry(source).or_insert(dist + 1);
                        *e = (*e).min(dist + 1);
                    }
                }
            }
            if step == 3 {
                self.settle(t);
            }
            return;
        }
        let center_port = self.local.center_port;
        let mut new_sources = BTreeMap::new();
        for &(p, m) in inbox {
            if let ClusterMsg::Bfs { source, dist } = m {
                if Some(p) == center_port {
                    self.known.insert(source, dist);
                    self.held = Some((source, dist));
                } else if !self.known.contains_key(&source) {
                    new_sources.entry(source).or_insert(dist);
                }
            }
        }
        if step == 2 && !new_sources.is_empty() {
            self.collisions += new_sources.len() as u64 - 1;
            self.forward = new_sources.into_iter().next();
        }
    }

    fn is_done(&self) -> bool {
        if self.local.is_center() {
            self.fresh.is_none()
                && self.held.is_none()
                && self.arrivals.is_empty()
                && (self.started || self.start.is_none())
        } else {
            self.held.is_none() && self.forward.is_none()
        }
    }
}

/// Stage 5 helper: a center streams its row to its members, one entry per
/// round.
struct RowNode {
    local: Local,
    queue: VecDeque<(u64, u64)>,
    row: HashMap<u64, u64>,
}

impl Protocol for RowNode {
    type Msg = ClusterMsg;

    fn send(&mut self, _ctx: &mut NodeCtx<'_>, out: &mut Outbox<ClusterMsg>) {
        if let Some((source, dist)) = self.queue.pop_front() {
            for p in 0..self.local.nb_center.len() {
                if self.local.nb_center[p] == self.local.label {
                    out.send(p, ClusterMsg::Bfs { source, dist });
                }
            }
        }
    }

    fn receive(&mut self, _ctx: &mut NodeCtx<'_>, inbox: &[(usize, ClusterMsg)]) {
        for &(p, m) in inbox {
            if let (true, ClusterMsg::Bfs { source, dist }) = (Some(p) == self.local.center_port, m)
            {
                self.row.insert(source, dist);
            }
        }
    }

    fn is_done(&self) -> bool {
        self.queue.is_empty()
    }
}

/// Everything the cluster stages leave at the nodes.
pub(crate) struct ClusterRun {
    pub result: ClusterApsp,
    pub locals: Vec<Local>,
    /// Per center index: source label -> distance, as known at the center.
    pub center_rows: Vec<HashMap<u64, u64>>,
}

pub(crate) fn cluster_apsp_on(
    net: &mut Network<'_>,
    clus: &ClusterAssignment,
) -> Result<ClusterRun, ApspError> {
    let g = net.graph();
    clus.validate(g)?;
    let n = g.n();
    let k = clus.center_count();
    let center_label: Vec<u64> = (0..n).map(|v| g.label(clus.s[v])).collect();

    // The "I am a center" announcement behind sample_clusters.
    net.charge("cluster-announce", 1);

    let mut ex: Vec<ExchangeNode> = (0..n)
        .map(|v| ExchangeNode {
            center: center_label[v],
            sent: false,
            got: vec![0; g.degree(v)],
        })
        .collect();
    net.run("cluster-exchange", &mut ex)?;

    let locals: Vec<Local> = (0..n)
        .map(|v| {
            let nb_center = std::mem::take(&mut ex[v].got);
            let center_port = if clus.is_center(v) {
                None
            } else {
                let c = g.label(clus.s[v]);
                Some(
                    net.ports(v)
                        .iter()
                        .position(|p| p.neighbor == c)
                        .expect("center is a neighbour"),
                )
            };
            Local {
                label: g.label(v),
                center: center_label[v],
                center_port,
                nb_center,
            }
        })
        .collect();

    let mut gather: Vec<GatherNode> = locals
        .iter()
        .map(|l| {
            let seen: BTreeSet<u64> = l.cross_ports().map(|p| l.nb_center[p]).collect();
            if l.is_center() {
                let relay = seen
                    .into_iter()
                    .map(|c| (c, Relay::Direct(l.port_into(c).unwrap())))
                    .collect();
                GatherNode {
                    up: VecDeque::new(),
                    center_port: None,
                    relay,
                }
            } else {
                GatherNode {
                    up: seen.into_iter().collect(),
                    center_port: l.center_port,
                    relay: BTreeMap::new(),
                }
            }
        })
        .collect();
    net.run("cluster-gather", &mut gather)?;

    let root_center = clus
        .centers
        .iter()
        .copied()
        .min_by_key(|&c| g.label(c))
        .expect("at least one center");
    let mut dfs: Vec<DfsNode> = (0..n)
        .map(|v| DfsNode {
            local: locals[v].clone(),
            relay: std::mem::take(&mut gather[v].relay),
            visited: BTreeSet::new(),
            pi: None,
            parent: None,
            is_root: v == root_center,
            state: DfsState::Idle,
            outq: Vec::new(),
            last_visited_forwarded: None,
        })
        .collect();
    net.run("cluster-dfs", &mut dfs)?;

    let mut pi = vec![0u64; k];
    for (i, &c) in clus.centers.iter().enumerate() {
        pi[i] = dfs[c].pi.ok_or_else(|| {
            ApspError::Internal(format!(
                "center {c} was never visited; the cluster graph is disconnected"
            ))
        })?;
    }

    let mut bfs: Vec<BfsNode> = (0..n)
        .map(|v| {
            let start = clus.center_index(v).map(|i| 2 * pi[i]);
            // Without G_c neighbours there is nothing to search.
            let alone = start.is_some() && dfs[v].relay.is_empty();
            let mut known = HashMap::new();
            if alone {
                known.insert(g.label(v), 0);
            }
            BfsNode {
                local: locals[v].clone(),
                start: start.filter(|_| !alone),
                started: alone,
                known,
                fresh: None,
                held: None,
                forward: None,
                arrivals: BTreeMap::new(),
                collisions: 0,
                last_virtual: 0,
            }
        })
        .collect();
    let real = net.run("cluster-bfs", &mut bfs)?;
    let virtual_rounds = real.div_ceil(3);
    let collisions = bfs.iter().map(|b| b.collisions).sum();

    let label_to_center: HashMap<u64, usize> = clus
        .centers
        .iter()
        .enumerate()
        .map(|(i, &c)| (g.label(c), i))
        .collect();
    let mut table = DistanceTable::new(k, u64::MAX);
    let mut center_rows = Vec::with_capacity(k);
    for (i, &c) in clus.centers.iter().enumerate() {
        for (&src, &d) in &bfs[c].known {
            table.set(i, label_to_center[&src], d);
        }
        center_rows.push(std::mem::take(&mut bfs[c].known));
    }
    // G_c distances are symmetric; the table is read as "row = center".
    let oracle = ClusterGraph::build(g, clus).distances();
    let matches_oracle = table == oracle;

    Ok(ClusterRun {
        result: ClusterApsp {
            table,
            pi,
            virtual_rounds,
            collisions,
            matches_oracle,
        },
        locals,
        center_rows,
    })
}

/// Rows of the centers streamed to their members. Returns each node's view
/// of its center's row.
pub(crate) fn disseminate_rows(
    net: &mut Network<'_>,
    run: &ClusterRun,
    clus: &ClusterAssignment,
) -> Result<Vec<HashMap<u64, u64>>, ApspError> {
    let n = net.graph().n();
    let mut nodes: Vec<RowNode> = (0..n)
        .map(|v| {
            let local = run.locals[v].clone();
            match clus.center_index(v) {
                Some(i) => {
                    let mut queue: Vec<(u64, u64)> =
                        run.center_rows[i].iter().map(|(&s, &d)| (s, d)).collect();
                    queue.sort_unstable();
                    RowNode {
                        local,
                        queue: queue.into(),
                        row: run.center_rows[i].clone(),
                    }
                }
                None => RowNode {
                    local,
                    queue: VecDeque::new(),
                    row: HashMap::new(),
                },
            }
        })
        .collect();
    net.run("cluster-rows", &mut nodes)?;
    Ok(nodes.into_iter().map(|r| r.row).collect())
}

/// Exact APSP on the cluster graph, computed by the centers. Rounds are in
/// the returned report's phases.
pub fn cluster_apsp(
    g: &Graph,
    clus: &ClusterAssignment,
    sim: SimConfig,
    seed: u64,
) -> Result<(ClusterApsp, u64), ApspError> {
    let mut net = Network::new(g, sim, seed);
    let run = cluster_apsp_on(&mut net, clus)?;
    Ok((run.result, net.rounds()))
}
