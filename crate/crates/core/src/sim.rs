//! Round-synchronous CONGEST execution engine.
//!
//! A protocol is a per-node state machine implementing [`Protocol`]. In each
//! round every node first produces at most one token per incident edge,
//! then receives everything its neighbours sent in that round. A node only
//! sees its own [`NodeCtx`]: its identifier, `n`, the round number, its
//! ports (neighbour identifier and edge weight) and a private RNG.
//!
//! A [`Network`] persists across several protocol runs ("phases") so that
//! multi-stage pipelines accumulate rounds and per-edge congestion.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeId, Graph, NodeId};
use crate::seed;

/// Default `b_c` in `B = b_c * ceil(log2 n)`.
pub const DEFAULT_BANDWIDTH_FACTOR: u32 = 4;
pub const DEFAULT_ROUND_CAP: u64 = 1_000_000;

/// Anything that travels over an edge.
pub trait Token: Clone {
    fn bit_size(&self) -> u32;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Port {
    /// Identifier (label) of the node at the other end.
    pub neighbor: u64,
    pub weight: u64,
}

pub struct NodeCtx<'a> {
    /// Simulator index of this node. Exposed so harnesses can map results
    /// back; protocols compare identifiers via `label`.
    pub node: NodeId,
    pub label: u64,
    pub n: usize,
    /// 1-based round number within the current phase.
    pub round: u64,
    pub ports: &'a [Port],
    pub rng: &'a mut ChaCha8Rng,
}

impl NodeCtx<'_> {
    pub fn degree(&self) -> usize {
        self.ports.len()
    }
}

pub trait Protocol {
    type Msg: Token;

    fn send(&mut self, ctx: &mut NodeCtx<'_>, out: &mut Outbox<Self::Msg>);

    /// `inbox` holds `(port, token)` pairs sorted by port.
    fn receive(&mut self, ctx: &mut NodeCtx<'_>, inbox: &[(usize, Self::Msg)]);

    /// Local termination. The engine stops a phase once every node reports
    /// done; tokens are delivered within their round, so nothing is in
    /// flight between rounds.
    fn is_done(&self) -> bool;
}

/// Per-round send buffer of one node.
pub struct Outbox<M> {
    sent: Vec<(usize, M)>,
    degree: usize,
    double_send: Option<usize>,
    stamp: Vec<bool>,
}

impl<M: Clone> Outbox<M> {
    fn new() -> Self {
        Outbox {
            sent: Vec::new(),
            degree: 0,
            double_send: None,
            stamp: Vec::new(),
        }
    }

    fn reset(&mut self, degree: usize) {
        for &(p, _) in &self.sent {
            self.stamp[p] = false;
        }
        self.sent.clear();
        self.degree = degree;
        self.double_send = None;
        if self.stamp.len() < degree {
            self.stamp.resize(degree, false);
        }
    }

    /// Queues `msg` on `port`. A second token on the same port in the same
    /// round is a bandwidth violation reported by the engine.
    pub fn send(&mut self, port: usize, msg: M) {
        assert!(port < self.degree, "port {port} out of range");
        if self.stamp[port] {
            self.double_send.get_or_insert(port);
            return;
        }
        self.stamp[port] = true;
        self.sent.push((port, msg));
    }

    pub fn send_all(&mut self, msg: M) {
        for p in 0..self.degree {
            self.send(p, msg.clone());
        }
    }

    pub fn is_used(&self, port: usize) -> bool {
        self.stamp[port]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseRounds {
    pub phase: String,
    pub rounds: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceRow {
    pub round: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub bits: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("bandwidth violation in phase '{phase}' round {round}: node {node} sent two tokens on port {port}")]
    DoubleSend {
        phase: String,
        round: u64,
        node: NodeId,
        port: usize,
    },
    #[error("bandwidth violation in phase '{phase}' round {round}: node {node} sent a {bits}-bit token, budget is {budget}")]
    Oversize {
        phase: String,
        round: u64,
        node: NodeId,
        bits: u32,
        budget: u32,
    },
    #[error("phase '{phase}' hit the round cap of {cap} (partial: {rounds_total} rounds, max congestion {max_congestion})")]
    RoundCap {
        phase: String,
        cap: u64,
        rounds_total: u64,
        max_congestion: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub bandwidth_factor: u32,
    pub round_cap: u64,
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            bandwidth_factor: DEFAULT_BANDWIDTH_FACTOR,
            round_cap: DEFAULT_ROUND_CAP,
            trace: false,
        }
    }
}

/// `ceil(log2 n)`, at least 1.
pub fn log2_ceil(n: usize) -> u32 {
    if n <= 2 {
        1
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

pub fn bandwidth_bits(n: usize, factor: u32) -> u32 {
    factor * log2_ceil(n)
}

/// Execution state shared by the phases of one experiment.
pub struct Network<'g> {
    graph: &'g Graph,
    cfg: SimConfig,
    bandwidth: u32,
    ports: Vec<Vec<Port>>,
    /// `links[v][p] = (neighbor index, neighbor's port back to v, edge id)`
    links: Vec<Vec<(NodeId, usize, EdgeId)>>,
    rngs: Vec<ChaCha8Rng>,
    rounds: u64,
    congestion: Vec<u64>,
    phases: Vec<PhaseRounds>,
    trace: Vec<TraceRow>,
}

impl<'g> Network<'g> {
    pub fn new(graph: &'g Graph, cfg: SimConfig, seed: u64) -> Self {
        let n = graph.n();
        let mut ports = Vec::with_capacity(n);
        let mut links = Vec::with_capacity(n);
        for v in 0..n {
            ports.push(
                graph
                    .neighbors(v)
                    .iter()
                    .map(|&(u, e)| Port {
                        neighbor: graph.label(u),
                        weight: graph.edge(e).w,
                    })
                    .collect(),
            );
            links.push(
                graph
                    .neighbors(v)
                    .iter()
                    .map(|&(u, e)| {
                        let back = graph
                            .neighbors(u)
                            .iter()
                            .position(|&(x, f)| x == v && f == e)
                            .expect("adjacency is symmetric");
                        (u, back, e)
                    })
                    .collect(),
            );
        }
        Network {
            graph,
            cfg,
            bandwidth: bandwidth_bits(n, cfg.bandwidth_factor),
            ports,
            links,
            rngs: (0..n).map(|v| seed::rng(seed, v as u64)).collect(),
            rounds: 0,
            congestion: vec![0; graph.m()],
            phases: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn bandwidth(&self) -> u32 {
        self.bandwidth
    }

    pub fn ports(&self, v: NodeId) -> &[Port] {
        &self.ports[v]
    }

    /// Edge id behind port `p` of node `v`.
    pub fn port_edge(&self, v: NodeId, p: usize) -> EdgeId {
        self.links[v][p].2
    }

    /// Node index behind port `p` of node `v`.
    pub fn port_node(&self, v: NodeId, p: usize) -> NodeId {
        self.links[v][p].0
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Tokens carried per undirected edge, both directions summed.
    pub fn congestion(&self) -> &[u64] {
        &self.congestion
    }

    pub fn max_congestion(&self) -> u64 {
        self.congestion.iter().copied().max().unwrap_or(0)
    }

    pub fn phases(&self) -> &[PhaseRounds] {
        &self.phases
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    /// Records rounds spent outside this network (e.g. a precomputed
    /// packing) so that reports stay complete.
    pub fn charge(&mut self, phase: &str, rounds: u64) {
        self.rounds += rounds;
        self.phases.push(PhaseRounds {
            phase: phase.to_string(),
            rounds,
        });
    }

    pub fn write_trace_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for row in &self.trace {
            out.write_record([
                row.round.to_string(),
                row.src.to_string(),
                row.dst.to_string(),
                row.bits.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Runs one protocol phase to quiescence and returns its round count.
    pub fn run<P: Protocol>(&mut self, phase: &str, nodes: &mut [P]) -> Result<u64, SimError> {
        let n = self.graph.n();
        assert_eq!(nodes.len(), n, "one program per node");
        let mut inboxes: Vec<Vec<(usize, P::Msg)>> = (0..n).map(|_| Vec::new()).collect();
        let mut outbox = Outbox::new();
        let mut round = 0u64;
        loop {
            if nodes.iter().all(Protocol::is_done) {
                break;
            }
            if round == self.cfg.round_cap {
                self.rounds += round;
                return Err(SimError::RoundCap {
                    phase: phase.to_string(),
                    cap: self.cfg.round_cap,
                    rounds_total: self.rounds,
                    max_congestion: self.max_congestion(),
                });
            }
            round += 1;
            let global_round = self.rounds + round;
            for (v, node) in nodes.iter_mut().enumerate() {
                outbox.reset(self.ports[v].len());
                let mut ctx = NodeCtx {
                    node: v,
                    label: self.graph.label(v),
                    n,
                    round,
                    ports: &self.ports[v],
                    rng: &mut self.rngs[v],
                };
                node.send(&mut ctx, &mut outbox);
                if let Some(port) = outbox.double_send {
                    return Err(SimError::DoubleSend {
                        phase: phase.to_string(),
                        round,
                        node: v,
                        port,
                    });
                }
                for (p, msg) in outbox.sent.drain(..) {
                    let bits = msg.bit_size();
                    if bits > self.bandwidth {
                        return Err(SimError::Oversize {
                            phase: phase.to_string(),
                            round,
                            node: v,
                            bits,
                            budget: self.bandwidth,
                        });
                    }
                    outbox.stamp[p] = false;
                    let (u, back, e) = self.links[v][p];
                    self.congestion[e] += 1;
                    if self.cfg.trace {
                        self.trace.push(TraceRow {
                            round: global_round,
                            src: v,
                            dst: u,
                            bits,
                        });
                    }
                    inboxes[u].push((back, msg));
                }
            }
            for (v, node) in nodes.iter_mut().enumerate() {
                let inbox = &mut inboxes[v];
                inbox.sort_by_key(|&(p, _)| p);
                let mut ctx = NodeCtx {
                    node: v,
                    label: self.graph.label(v),
                    n,
                    round,
                    ports: &self.ports[v],
                    rng: &mut self.rngs[v],
                };
                node.receive(&mut ctx, inbox);
                inbox.clear();
            }
        }
        self.rounds += round;
        self.phases.push(PhaseRounds {
            phase: phase.to_string(),
            rounds: round,
        });
        Ok(round)
    }
}

/// Outcome of a distributed pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rounds_used: u64,
    pub max_edge_congestion: u64,
    pub correctness: bool,
    /// `ceil(k / lambda)`, the universal broadcast lower bound.
    pub reference_lower_bound: Option<u64>,
    /// `(n ln n)/delta + (k ln n)/lambda`.
    pub reference_upper_formula: Option<f64>,
    pub phases: Vec<PhaseRounds>,
}

impl RunReport {
    pub fn from_network(net: &Network<'_>, correctness: bool) -> Self {
        RunReport {
            rounds_used: net.rounds(),
            max_edge_congestion: net.max_congestion(),
            correctness,
            reference_lower_bound: None,
            reference_upper_formula: None,
            phases: net.phases().to_vec(),
        }
    }

    pub fn with_broadcast_references(
        mut self,
        n: usize,
        k: usize,
        min_degree: usize,
        lambda: usize,
    ) -> Self {
        let lambda = lambda.max(1);
        self.reference_lower_bound = Some((k as u64).div_ceil(lambda as u64));
        let ln = (n.max(2) as f64).ln();
        self.reference_upper_formula =
            Some(n as f64 * ln / min_degree.max(1) as f64 + k as f64 * ln / lambda as f64);
        self
    }

    pub fn phase_rounds(&self, phase: &str) -> u64 {
        self.phases
            .iter()
            .filter(|p| p.phase == phase)
            .map(|p| p.rounds)
            .sum()
    }

    /// The lower-bound invariant `rounds >= ceil(k/lambda)`, vacuous when
    /// no reference applies.
    pub fn respects_lower_bound(&self) -> bool {
        self.reference_lower_bound
            .is_none_or(|lb| self.rounds_used >= lb)
    }
}
