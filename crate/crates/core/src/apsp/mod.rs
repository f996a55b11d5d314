//! Approximate all-pairs shortest paths on top of k-broadcast.
//!
//! * Unweighted `(3, 2)`: cluster the graph around sampled centers, solve
//!   APSP exactly on the cluster graph, hand each center's row to its
//!   members, broadcast every node's center with k-broadcast, and estimate
//!   `d'(u, v) = 3 d_Gc(s(u), s(v)) + 2` locally.
//! * Weighted `(2r-1, 0)`: build a Baswana–Sen spanner, broadcast its edges,
//!   and run shortest paths on the received spanner locally.

pub mod cluster;
pub mod spanner;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cluster::{
    center_probability, cluster_apsp, sample_clusters, ClusterApsp, ClusterAssignment, ClusterGraph,
};
pub use spanner::{baswana_sen_spanner, spanner_pairs, Spanner};

use crate::broadcast::{k_broadcast_on, BroadcastError, BroadcastInstance, Message, Payload};
use crate::graph::{bit_len, dijkstra, DistanceTable, Graph, NodeId};
use crate::packing::{auto_packing, PackingError, TreePacking, DEFAULT_BOUND_CONST};
use crate::seed;
use crate::sim::{Network, RunReport, SimConfig, SimError};

#[derive(Debug, Error)]
pub enum ApspError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("node {node} has no sampled neighbour; reseed the clustering")]
    Coverage { node: NodeId },
    #[error("clustering left node {node} uncovered in all {attempts} attempts; raise the cluster constant")]
    CoverageExhausted { attempts: usize, node: NodeId },
    #[error("{count} BFS token collisions in the cluster-graph simulation")]
    Collision { count: u64 },
    #[error("a {bits}-bit message does not fit the {budget}-bit bandwidth; use smaller identifiers or weights")]
    Encoding { bits: u32, budget: u32 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Broadcast(#[from] BroadcastError),
    #[error(transparent)]
    Packing(#[from] PackingError),
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

/// An all-pairs distance estimate with its claimed `(alpha, beta)`.
#[derive(Debug, Clone)]
pub struct DistanceEstimate {
    pub table: DistanceTable,
    pub alpha: f64,
    pub beta: f64,
}

/// How an estimate compares with exact distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub pairs: usize,
    /// Pairs with `d' < d`.
    pub below_truth: usize,
    /// Pairs with `d' > alpha d + beta`.
    pub above_bound: usize,
    /// Largest `d' / d` over pairs with `d > 0`.
    pub worst_ratio: f64,
    /// Largest `d' - alpha d` over all pairs.
    pub worst_additive: f64,
}

impl SandwichCheck {
    pub fn holds(&self) -> bool {
        self.below_truth == 0 && self.above_bound == 0
    }
}

impl DistanceEstimate {
    pub fn is_symmetric(&self) -> bool {
        let n = self.table.n();
        (0..n).all(|u| (0..u).all(|v| self.table.get(u, v) == self.table.get(v, u)))
    }

    pub fn compare(&self, exact: &DistanceTable) -> SandwichCheck {
        let n = self.table.n();
        let mut check = SandwichCheck {
            pairs: n * n,
            below_truth: 0,
            above_bound: 0,
            worst_ratio: 1.0,
            worst_additive: f64::NEG_INFINITY,
        };
        for u in 0..n {
            for v in 0..n {
                let d = exact.get(u, v) as f64;
                let e = self.table.get(u, v) as f64;
                if e < d {
                    check.below_truth += 1;
                }
                if e > self.alpha * d + self.beta {
                    check.above_bound += 1;
                }
                if d > 0.0 {
                    check.worst_ratio = check.worst_ratio.max(e / d);
                }
                check.worst_additive = check.worst_additive.max(e - self.alpha * d);
            }
        }
        if n == 0 {
            check.worst_additive = 0.0;
        }
        check
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApspOptions {
    pub sim: SimConfig,
    /// Diameter-bound constant for the packing search.
    pub bound_const: f64,
    /// Clustering attempts before giving up.
    pub coverage_attempts: usize,
}

impl Default for ApspOptions {
    fn default() -> Self {
        ApspOptions {
            sim: SimConfig::default(),
            bound_const: DEFAULT_BOUND_CONST,
            coverage_attempts: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnweightedApsp {
    pub estimate: DistanceEstimate,
    pub report: RunReport,
    pub clusters: ClusterAssignment,
    pub cluster: ClusterApsp,
    /// Clustering attempts used (1 when the first one covered every node).
    pub attempts: usize,
    pub parts: usize,
    pub lambda_guess: usize,
}

const PACKING_STREAM: u64 = 0x9ac4;

fn packing_for(
    g: &Graph,
    c_const: f64,
    opts: &ApspOptions,
    seed: u64,
) -> Result<(TreePacking, usize), ApspError> {
    let (search, packing) = auto_packing(
        g,
        c_const,
        opts.bound_const,
        opts.sim,
        seed::derive(seed, PACKING_STREAM),
    )?;
    Ok((packing, search.lambda_guess))
}

fn check_fits(bits: u32, net: &Network<'_>) -> Result<(), ApspError> {
    if bits > net.bandwidth() {
        Err(ApspError::Encoding {
            bits,
            budget: net.bandwidth(),
        })
    } else {
        Ok(())
    }
}

fn label_index(g: &Graph) -> HashMap<u64, NodeId> {
    (0..g.n()).map(|v| (g.label(v), v)).collect()
}

/// `(3, 2)`-approximate unweighted APSP.
pub fn estimate_unweighted_apsp(
    g: &Graph,
    c_cluster: f64,
    c_const: f64,
    seed: u64,
    opts: &ApspOptions,
) -> Result<UnweightedApsp, ApspError> {
    if g.is_weighted() {
        return Err(ApspError::InvalidParameters(
            "the (3,2) estimate is for unweighted graphs; use the weighted pipeline".into(),
        ));
    }
    if g.n() < 2 || !g.is_connected() {
        return Err(ApspError::InvalidParameters(
            "graph must be connected with at least 2 nodes".into(),
        ));
    }
    let mut net = Network::new(g, opts.sim, seed);
    let attempts = opts.coverage_attempts.max(1);
    let mut clustering = None;
    let mut last_uncovered = 0;
    for a in 0..attempts {
        match sample_clusters(g, c_cluster, seed::derive(seed, a as u64)) {
            Ok(c) => {
                clustering = Some((c, a + 1));
                break;
            }
            Err(ApspError::Coverage { node }) => {
                // The failed attempt's announcement round is still spent.
                net.charge("cluster-announce", 1);
                last_uncovered = node;
            }
            Err(e) => return Err(e),
        }
    }
    let Some((clus, used)) = clustering else {
        return Err(ApspError::CoverageExhausted {
            attempts,
            node: last_uncovered,
        });
    };

    let mut out = unweighted_on(&mut net, clus, c_const, seed, opts)?;
    out.attempts = used;
    Ok(out)
}

/// The `(3, 2)` pipeline for a given clustering.
pub fn estimate_unweighted_apsp_with(
    g: &Graph,
    clus: ClusterAssignment,
    c_const: f64,
    seed: u64,
    opts: &ApspOptions,
) -> Result<UnweightedApsp, ApspError> {
    if g.is_weighted() || g.n() < 2 || !g.is_connected() {
        return Err(ApspError::InvalidParameters(
            "graph must be unweighted and connected with at least 2 nodes".into(),
        ));
    }
    let mut net = Network::new(g, opts.sim, seed);
    unweighted_on(&mut net, clus, c_const, seed, opts)
}

fn unweighted_on(
    net: &mut Network<'_>,
    clus: ClusterAssignment,
    c_const: f64,
    seed: u64,
    opts: &ApspOptions,
) -> Result<UnweightedApsp, ApspError> {
    let g = net.graph();
    let run = cluster::cluster_apsp_on(net, &clus)?;
    if run.result.collisions > 0 {
        return Err(ApspError::Collision {
            count: run.result.collisions,
        });
    }
    let rows = cluster::disseminate_rows(net, &run, &clus)?;

    let (packing, lambda_guess) = packing_for(g, c_const, opts, seed)?;
    net.charge("trees", packing.rounds);
    let lb = g.label_bits();
    check_fits(2 * lb, net)?;
    let inst = BroadcastInstance {
        messages: (0..g.n())
            .map(|v| Message {
                holder: v,
                content: Payload::new(g.label(v) << lb | g.label(clus.s[v]), 2 * lb),
            })
            .collect(),
    };
    let (received, _) = k_broadcast_on(net, &inst, &packing)?;

    let index = label_index(g);
    let mask = (1u64 << lb) - 1;
    let mut table = DistanceTable::new(g.n(), u64::MAX);
    let mut complete = true;
    for u in 0..g.n() {
        complete &= received[u].len() == g.n();
        for item in &received[u] {
            let (lv, ls) = (item.value >> lb, item.value & mask);
            let d = rows[u].get(&ls).ok_or_else(|| {
                ApspError::Internal(format!(
                    "node {u} has no cluster-graph distance to center {ls}"
                ))
            })?;
            table.set(u, index[&lv], 3 * d + 2);
        }
    }
    let report = RunReport::from_network(net, complete);
    Ok(UnweightedApsp {
        estimate: DistanceEstimate {
            table,
            alpha: 3.0,
            beta: 2.0,
        },
        report,
        clusters: clus,
        cluster: run.result,
        attempts: 1,
        parts: packing.len(),
        lambda_guess,
    })
}

/// Spanner parameter: fixed, or `ceil(log2 n / log2 log2 n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stretch {
    Fixed(usize),
    Auto,
}

/// `ceil(log2 n / log2 log2 n)`, at least 1.
pub fn auto_stretch(n: usize) -> usize {
    let l = (n.max(1) as f64).log2();
    let ll = l.log2();
    if ll <= 0.0 {
        return 1;
    }
    ((l / ll).ceil() as usize).max(1)
}

impl Stretch {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            Stretch::Fixed(r) => r,
            Stretch::Auto => auto_stretch(n),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeightedApsp {
    pub estimate: DistanceEstimate,
    pub report: RunReport,
    pub spanner: Spanner,
    pub parts: usize,
    pub lambda_guess: usize,
}

/// `(2r-1)`-approximate weighted APSP.
pub fn estimate_weighted_apsp(
    g: &Graph,
    stretch: Stretch,
    c_const: f64,
    seed: u64,
    opts: &ApspOptions,
) -> Result<WeightedApsp, ApspError> {
    let r = stretch.resolve(g.n());
    if r < 1 {
        return Err(ApspError::InvalidParameters(
            "spanner parameter r must be at least 1".into(),
        ));
    }
    if g.n() < 2 || !g.is_connected() {
        return Err(ApspError::InvalidParameters(
            "graph must be connected with at least 2 nodes".into(),
        ));
    }
    let mut net = Network::new(g, opts.sim, seed);
    let run = spanner::baswana_sen_on(&mut net, r)?;

    let lb = g.label_bits();
    let wb = bit_len(g.edges().iter().map(|e| e.w).max().unwrap_or(1));
    check_fits(2 * lb + wb, &net)?;
    let mut messages = Vec::with_capacity(run.spanner.len());
    for (v, ports) in run.owned.iter().enumerate() {
        for &p in ports {
            let port = net.ports(v)[p];
            let value = (g.label(v) << lb | port.neighbor) << wb | port.weight;
            messages.push(Message {
                holder: v,
                content: Payload::new(value, 2 * lb + wb),
            });
        }
    }
    let inst = BroadcastInstance { messages };
    let (packing, lambda_guess) = packing_for(g, c_const, opts, seed)?;
    net.charge("trees", packing.rounds);
    let (received, _) = k_broadcast_on(&mut net, &inst, &packing)?;

    let expected = inst.sorted_contents();
    let correct = received.iter().all(|r| *r == expected);
    // Every node holds the same edge list, so one local computation stands
    // for all of them.
    let index = label_index(g);
    let (lmask, wmask) = ((1u64 << lb) - 1, (1u64 << wb) - 1);
    let edges = received[0].iter().map(|item| {
        let w = item.value & wmask;
        let rest = item.value >> wb;
        (index[&(rest >> lb)], index[&(rest & lmask)], w)
    });
    let h = Graph::from_weighted_edges(g.n(), edges, true)
        .map_err(|e| ApspError::Internal(format!("received spanner is malformed: {e}")))?;
    let mut table = DistanceTable::new(g.n(), u64::MAX);
    for s in 0..g.n() {
        table.set_row(s, &dijkstra(&h, s));
    }
    let report = RunReport::from_network(&net, correct);
    Ok(WeightedApsp {
        estimate: DistanceEstimate {
            table,
            alpha: (2 * r - 1) as f64,
            beta: 0.0,
        },
        report,
        spanner: run.spanner,
        parts: packing.len(),
        lambda_guess,
    })
}
