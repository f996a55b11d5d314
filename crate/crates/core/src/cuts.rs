//! Cut estimation through a broadcast sparsifier.
//!
//! A sparsifier `H` is built, each of its edges becomes one broadcast
//! message `(u, v, weight)`, and after k-broadcast every node holds `H` and
//! answers cut queries locally. The default sparsifier keeps each edge with
//! probability `q = min(1, c_s ln n / (eps^2 lambda))` and weight `1/q`;
//! any other constructor producing a [`CutSparsifier`] plugs in unchanged.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::broadcast::{k_broadcast_on, BroadcastError, BroadcastInstance, Message, Payload};
use crate::graph::{Graph, NodeId};
use crate::packing::TreePacking;
use crate::seed;
use crate::sim::{Network, RunReport, SimConfig};

#[derive(Debug, Error)]
pub enum CutError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error(
        "edge weight needs {needed} bits but only {available} remain in a {budget}-bit message; \
         use fewer fractional bits (coarser quantization)"
    )]
    Encoding {
        needed: u32,
        available: u32,
        budget: u32,
    },
    #[error("query mentions node {node}, graph has {n} nodes")]
    BadQuery { node: NodeId, n: usize },
    #[error(transparent)]
    Broadcast(#[from] BroadcastError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub w: f64,
}

/// A weighted graph on the same nodes meant to approximate every cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutSparsifier {
    pub n: usize,
    pub edges: Vec<WeightedEdge>,
    /// Target relative error.
    pub epsilon: f64,
    /// Sampling probability of the uniform constructor (1 for others).
    pub q: f64,
}

impl CutSparsifier {
    /// Number of edges `m~`.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn cut(&self, side: &[bool]) -> f64 {
        cut_of(&self.edges, side)
    }
}

fn cut_of(edges: &[WeightedEdge], side: &[bool]) -> f64 {
    edges
        .iter()
        .filter(|e| side[e.u] != side[e.v])
        .map(|e| e.w)
        .sum()
}

/// Membership vector of a node subset.
pub fn side_of(n: usize, subset: &[NodeId]) -> Result<Vec<bool>, CutError> {
    let mut side = vec![false; n];
    for &v in subset {
        if v >= n {
            return Err(CutError::BadQuery { node: v, n });
        }
        side[v] = true;
    }
    Ok(side)
}

/// Exact cut value in `g` (sum of crossing edge weights).
pub fn true_cut(g: &Graph, side: &[bool]) -> u64 {
    g.edges()
        .iter()
        .filter(|e| side[e.u] != side[e.v])
        .map(|e| e.w)
        .sum()
}

/// `min(1, c_s ln n / (eps^2 lambda))`.
pub fn sampling_probability(n: usize, epsilon: f64, c_s: f64, lambda: usize) -> f64 {
    let ln = (n.max(2) as f64).ln();
    (c_s * ln / (epsilon * epsilon * lambda.max(1) as f64)).min(1.0)
}

/// Keeps every edge independently with probability `q`, weight `1/q`.
pub fn uniform_cut_sparsifier(
    g: &Graph,
    epsilon: f64,
    c_s: f64,
    lambda: usize,
    seed: u64,
) -> Result<CutSparsifier, CutError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CutError::InvalidParameters(format!(
            "epsilon must be in (0, 1), got {epsilon}"
        )));
    }
    if !c_s.is_finite() || c_s <= 0.0 {
        return Err(CutError::InvalidParameters(format!(
            "c_s must be positive, got {c_s}"
        )));
    }
    if lambda < 1 {
        return Err(CutError::InvalidParameters(
            "lambda must be at least 1".into(),
        ));
    }
    if g.is_weighted() {
        return Err(CutError::InvalidParameters(
            "uniform sampling needs an unweighted graph".into(),
        ));
    }
    let q = sampling_probability(g.n(), epsilon, c_s, lambda);
    let mut rng = seed::rng(seed, 0x5ca7);
    let edges = g
        .edges()
        .iter()
        .filter(|_| rng.gen_bool(q))
        .map(|e| WeightedEdge {
            u: e.u,
            v: e.v,
            w: 1.0 / q,
        })
        .collect();
    Ok(CutSparsifier {
        n: g.n(),
        edges,
        epsilon,
        q,
    })
}

/// Fixed-point layout of a weight inside one message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantization {
    pub int_bits: u32,
    pub frac_bits: u32,
}

impl Quantization {
    /// Fits the largest weight of `sp` into what is left of `budget` after
    /// two identifiers. `frac_bits = None` uses every remaining bit.
    pub fn plan(
        sp: &CutSparsifier,
        id_bits: u32,
        budget: u32,
        frac_bits: Option<u32>,
    ) -> Result<Self, CutError> {
        let max_w = sp.edges.iter().map(|e| e.w).fold(1.0f64, f64::max);
        let int_bits = crate::graph::bit_len(max_w.ceil() as u64);
        let available = budget.saturating_sub(2 * id_bits);
        let frac_bits = frac_bits.unwrap_or(available.saturating_sub(int_bits));
        let needed = int_bits + frac_bits;
        if needed > available || needed > 63 {
            return Err(CutError::Encoding {
                needed,
                available,
                budget,
            });
        }
        Ok(Quantization {
            int_bits,
            frac_bits,
        })
    }

    pub fn bits(&self) -> u32 {
        self.int_bits + self.frac_bits
    }

    pub fn encode(&self, w: f64) -> u64 {
        (w * (1u64 << self.frac_bits) as f64).round() as u64
    }

    pub fn decode(&self, x: u64) -> f64 {
        x as f64 / (1u64 << self.frac_bits) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct CutOptions {
    pub sim: SimConfig,
    /// Fractional bits of the weight field; `None` uses all that fit.
    pub frac_bits: Option<u32>,
    /// Edge connectivity for the report's reference lines; exact when absent.
    pub lambda: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutAnswer {
    pub query: Vec<NodeId>,
    pub estimate: f64,
    pub truth: u64,
}

impl CutAnswer {
    /// `|estimate - truth| / truth`, 0 for an empty true cut estimated as 0.
    pub fn relative_error(&self) -> f64 {
        let t = self.truth as f64;
        if t == 0.0 {
            if self.estimate == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.estimate - t).abs() / t
        }
    }
}

#[derive(Debug, Clone)]
pub struct CutOutcome {
    pub report: RunReport,
    pub answers: Vec<CutAnswer>,
    /// Every node received the same sparsifier, so every node gives the
    /// same answers.
    pub consistent: bool,
    pub quantization: Quantization,
}

/// Broadcasts `sp` over `packing` and answers every query from the
/// received copy.
pub fn broadcast_and_estimate_cuts(
    g: &Graph,
    sp: &CutSparsifier,
    packing: &TreePacking,
    queries: &[Vec<NodeId>],
    opts: &CutOptions,
    seed: u64,
) -> Result<CutOutcome, CutError> {
    if sp.n != g.n() {
        return Err(CutError::InvalidParameters(
            "sparsifier and graph node counts differ".into(),
        ));
    }
    let sides = queries
        .iter()
        .map(|q| side_of(g.n(), q))
        .collect::<Result<Vec<_>, _>>()?;
    let mut net = Network::new(g, opts.sim, seed);
    net.charge("trees", packing.rounds);
    let lb = g.label_bits();
    let quant = Quantization::plan(sp, lb, net.bandwidth(), opts.frac_bits)?;
    let wb = quant.bits();
    let messages = sp
        .edges
        .iter()
        .map(|e| {
            // The endpoint with the smaller identifier announces the edge.
            let (a, b) = if g.label(e.u) < g.label(e.v) {
                (e.u, e.v)
            } else {
                (e.v, e.u)
            };
            let value = (g.label(a) << lb | g.label(b)) << wb | quant.encode(e.w);
            Message {
                holder: a,
                content: Payload::new(value, 2 * lb + wb),
            }
        })
        .collect();
    let inst = BroadcastInstance { messages };
    let (received, _) = k_broadcast_on(&mut net, &inst, packing)?;

    let expected = inst.sorted_contents();
    let consistent = received.iter().all(|r| *r == received[0]);
    let complete = received.iter().all(|r| *r == expected);
    let index: std::collections::HashMap<u64, NodeId> =
        (0..g.n()).map(|v| (g.label(v), v)).collect();
    let (lmask, wmask) = ((1u64 << lb) - 1, (1u64 << wb) - 1);
    // All copies are identical when `consistent`; any node's copy answers.
    let local: Vec<WeightedEdge> = received
        .first()
        .map(|r| {
            r.iter()
                .map(|item| {
                    let rest = item.value >> wb;
                    WeightedEdge {
                        u: index[&(rest >> lb)],
                        v: index[&(rest & lmask)],
                        w: quant.decode(item.value & wmask),
                    }
                })
                .collect()
        })
        .unwrap_or_default();
    let answers = queries
        .iter()
        .zip(&sides)
        .map(|(q, side)| CutAnswer {
            query: q.clone(),
            estimate: cut_of(&local, side),
            truth: true_cut(g, side),
        })
        .collect();
    let lambda = opts
        .lambda
        .unwrap_or_else(|| crate::graph::exact_edge_connectivity(g));
    let report = RunReport::from_network(&net, complete && consistent).with_broadcast_references(
        g.n(),
        sp.len(),
        g.min_degree(),
        lambda,
    );
    Ok(CutOutcome {
        report,
        answers,
        consistent,
        quantization: quant,
    })
}

/// Every proper cut of `g` as a query (side containing node 0), for
/// exhaustive checks on small graphs.
pub fn all_cut_queries(g: &Graph) -> Result<Vec<Vec<NodeId>>, crate::graph::GraphError> {
    Ok(crate::graph::enumerate_cuts(g)?
        .into_iter()
        .map(|c| c.members(g.n()))
        .collect())
}
