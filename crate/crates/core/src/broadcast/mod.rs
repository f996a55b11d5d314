//! Broadcast protocols on the simulator: BFS, item numbering, the single
//! tree pipelined baseline, and k-broadcast over an edge-disjoint packing.

mod bfs;
mod numbering;
mod pipeline;

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bfs::{BfsNode, BfsTree, PartBfs, NO_PART};
pub use numbering::SweepNode;
pub use pipeline::{PartPipe, Payload, PipelineNode};

use crate::graph::{exact_edge_connectivity, min_cut_side, Graph, NodeId, DEFAULT_ID_EXPONENT};
use crate::packing::TreePacking;
use crate::seed;
use crate::sim::{Network, RunReport, SimConfig, SimError};

#[derive(Debug, Error)]
pub enum BroadcastError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("BFS in part {part} never reached node {node}; the edge set is disconnected")]
    Unreached { part: usize, node: NodeId },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Runs BFS in every part at once from `root`; `port_parts[v][p]` names the
/// part of port `p` at node `v` (or [`NO_PART`]).
pub fn run_bfs(
    net: &mut Network<'_>,
    port_parts: &[Vec<usize>],
    parts: usize,
    root: NodeId,
    phase: &str,
) -> Result<Vec<BfsTree>, BroadcastError> {
    let n = net.graph().n();
    let mut nodes: Vec<BfsNode> = (0..n)
        .map(|v| BfsNode::new(port_parts[v].clone(), parts, v == root))
        .collect();
    net.run(phase, &mut nodes)?;
    (0..parts)
        .map(|part| {
            let mut tree = BfsTree {
                root,
                parent: vec![None; n],
                depth: vec![0; n],
                parent_port: vec![None; n],
                child_ports: vec![Vec::new(); n],
            };
            for (v, node) in nodes.iter().enumerate() {
                let st = &node.parts[part];
                if !st.reached {
                    return Err(BroadcastError::Unreached { part, node: v });
                }
                tree.depth[v] = st.depth;
                tree.parent_port[v] = st.parent_port;
                tree.parent[v] = st.parent_port.map(|p| net.port_node(v, p));
                let mut kids = st.child_ports.clone();
                kids.sort_unstable();
                tree.child_ports[v] = kids;
            }
            Ok(tree)
        })
        .collect()
}

/// BFS over all of `g` from `root` on a fresh network.
pub fn bfs(
    g: &Graph,
    root: NodeId,
    sim: SimConfig,
    seed: u64,
) -> Result<(BfsTree, u64), BroadcastError> {
    let mut net = Network::new(g, sim, seed);
    let ports = whole_graph_ports(g);
    let tree = run_bfs(&mut net, &ports, 1, root, "bfs")?.remove(0);
    Ok((tree, net.rounds()))
}

pub(crate) fn whole_graph_ports(g: &Graph) -> Vec<Vec<usize>> {
    (0..g.n()).map(|v| vec![0; g.degree(v)]).collect()
}

/// Identifier ranges `1..=X` handed to each node's items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NumberedMessages {
    pub ranges: Vec<Range<u64>>,
    pub total: u64,
}

impl NumberedMessages {
    pub fn ids(&self, v: NodeId) -> Range<u64> {
        self.ranges[v].clone()
    }
}

/// Numbers items held by the nodes on an existing network: BFS from the
/// smallest identifier, then the two tree sweeps.
pub fn assign_ids_on(
    net: &mut Network<'_>,
    counts: &[u64],
) -> Result<NumberedMessages, BroadcastError> {
    let g = net.graph();
    let cap = (g.n().max(2) as u64).saturating_pow(DEFAULT_ID_EXPONENT);
    if let Some(v) = counts.iter().position(|&x| x > cap) {
        return Err(BroadcastError::Precondition(format!(
            "node {v} holds {} items, more than n^{DEFAULT_ID_EXPONENT} = {cap}",
            counts[v]
        )));
    }
    let root = g.min_label_node();
    let tree = run_bfs(net, &whole_graph_ports(g), 1, root, "numbering-bfs")?.remove(0);
    let mut nodes: Vec<SweepNode> = (0..g.n())
        .map(|v| {
            let labels: Vec<u64> = net.ports(v).iter().map(|p| p.neighbor).collect();
            SweepNode::new(
                counts[v],
                tree.parent_port[v],
                &tree.child_ports[v],
                &labels,
            )
        })
        .collect();
    net.run("numbering", &mut nodes)?;
    let ranges = nodes
        .iter()
        .map(|s| s.range().expect("every node received a range"))
        .collect();
    Ok(NumberedMessages {
        ranges,
        total: counts.iter().sum(),
    })
}

pub fn assign_ids(
    g: &Graph,
    counts: &[u64],
    sim: SimConfig,
    seed: u64,
) -> Result<(NumberedMessages, u64), BroadcastError> {
    let mut net = Network::new(g, sim, seed);
    let ids = assign_ids_on(&mut net, counts)?;
    Ok((ids, net.rounds()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub holder: NodeId,
    pub content: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastInstance {
    pub messages: Vec<Message>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Everything at the node with the largest identifier.
    OneNode,
    /// Each message at an independent uniform node.
    Uniform,
    /// Round-robin over the side of a minimum cut away from the leader.
    AdversarialCut,
}

impl std::str::FromStr for Placement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one-node" => Ok(Placement::OneNode),
            "uniform" => Ok(Placement::Uniform),
            "adversarial-cut" => Ok(Placement::AdversarialCut),
            _ => Err(format!("unknown placement '{s}'")),
        }
    }
}

impl BroadcastInstance {
    pub fn k(&self) -> usize {
        self.messages.len()
    }

    /// `k` random contents of `content_bits` bits placed per `placement`.
    pub fn generate(
        g: &Graph,
        k: usize,
        placement: Placement,
        content_bits: u32,
        seed: u64,
    ) -> Self {
        let mut rng = seed::rng(seed, 0xb40ad);
        let holders: Vec<NodeId> = match placement {
            Placement::OneNode => {
                let v = (0..g.n()).max_by_key(|&v| g.label(v)).unwrap_or(0);
                vec![v; k]
            }
            Placement::Uniform => (0..k).map(|_| rng.gen_range(0..g.n())).collect(),
            Placement::AdversarialCut => {
                let (_, mut side) = min_cut_side(g);
                let leader = g.min_label_node();
                side.retain(|&v| v != leader);
                if side.is_empty() {
                    side.push((0..g.n()).max_by_key(|&v| g.label(v)).unwrap_or(0));
                }
                (0..k).map(|i| side[i % side.len()]).collect()
            }
        };
        let mask = if content_bits >= 64 {
            u64::MAX
        } else {
            (1u64 << content_bits) - 1
        };
        let messages = holders
            .into_iter()
            .map(|holder| Message {
                holder,
                content: Payload::new(rng.gen::<u64>() & mask, content_bits),
            })
            .collect();
        BroadcastInstance { messages }
    }

    pub fn sorted_contents(&self) -> Vec<Payload> {
        let mut all: Vec<Payload> = self.messages.iter().map(|m| m.content).collect();
        all.sort_unstable();
        all
    }

    fn per_holder(&self, n: usize) -> Vec<Vec<Payload>> {
        let mut own = vec![Vec::new(); n];
        for m in &self.messages {
            own[m.holder].push(m.content);
        }
        own
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct BroadcastOptions {
    pub sim: SimConfig,
    /// Edge connectivity used for the `ceil(k/lambda)` reference line;
    /// computed exactly when absent.
    pub lambda: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct BroadcastOutcome {
    pub report: RunReport,
    /// Per node, everything it received, sorted.
    pub received: Vec<Vec<Payload>>,
    /// Messages carried by each part.
    pub part_loads: Vec<usize>,
}

fn everyone_has_everything(received: &[Vec<Payload>], expected: &[Payload]) -> bool {
    received.iter().all(|r| r.as_slice() == expected)
}

fn collect_received(nodes: &[PipelineNode]) -> Vec<Vec<Payload>> {
    nodes
        .iter()
        .map(|node| {
            let mut r: Vec<Payload> = node.received().copied().collect();
            r.sort_unstable();
            r
        })
        .collect()
}

/// The textbook `O(k + D)` broadcast: BFS tree from `root`, then the
/// convergecast/broadcast pipeline over it.
pub fn basic_broadcast(
    g: &Graph,
    inst: &BroadcastInstance,
    root: NodeId,
    opts: &BroadcastOptions,
    seed: u64,
) -> Result<BroadcastOutcome, BroadcastError> {
    let mut net = Network::new(g, opts.sim, seed);
    let ports = whole_graph_ports(g);
    let tree = run_bfs(&mut net, &ports, 1, root, "bfs")?.remove(0);
    let own = inst.per_holder(g.n());
    let mut nodes: Vec<PipelineNode> = own
        .into_iter()
        .enumerate()
        .map(|(v, items)| {
            let pipe = PartPipe::new(tree.parent_port[v], tree.child_ports[v].clone(), items);
            PipelineNode::new(ports[v].clone(), vec![pipe])
        })
        .collect();
    net.run("pipeline", &mut nodes)?;
    let received = collect_received(&nodes);
    let ok = everyone_has_everything(&received, &inst.sorted_contents());
    let lambda = opts.lambda.unwrap_or_else(|| exact_edge_connectivity(g));
    let report = RunReport::from_network(&net, ok).with_broadcast_references(
        g.n(),
        inst.k(),
        g.min_degree(),
        lambda,
    );
    Ok(BroadcastOutcome {
        report,
        received,
        part_loads: vec![inst.k()],
    })
}

/// Messages numbered `(i-1)K+1 ..= iK` go to part `i` (0-based here),
/// `K = ceil(k / parts)`.
pub fn part_of_message(id: u64, k: usize, parts: usize) -> usize {
    let block = (k as u64).div_ceil(parts.max(1) as u64).max(1);
    ((id - 1) / block) as usize
}

/// k-broadcast on an existing network: number the messages over `g`, then
/// run every part's pipeline in parallel on its own edges.
pub fn k_broadcast_on(
    net: &mut Network<'_>,
    inst: &BroadcastInstance,
    packing: &TreePacking,
) -> Result<(Vec<Vec<Payload>>, Vec<usize>), BroadcastError> {
    let n = net.graph().n();
    let parts = packing.len();
    let own = inst.per_holder(n);
    let counts: Vec<u64> = own.iter().map(|o| o.len() as u64).collect();
    let ids = assign_ids_on(net, &counts)?;
    let k = inst.k();
    let mut loads = vec![0usize; parts];
    let mut nodes = Vec::with_capacity(n);
    for (v, items) in own.into_iter().enumerate() {
        let mut per_part: Vec<Vec<Payload>> = vec![Vec::new(); parts];
        for (id, item) in ids.ids(v).zip(items) {
            let p = part_of_message(id, k, parts);
            per_part[p].push(item);
            loads[p] += 1;
        }
        let pipes = per_part
            .into_iter()
            .enumerate()
            .map(|(i, items)| {
                let t = &packing.trees[i];
                PartPipe::new(t.parent_port[v], t.child_ports[v].clone(), items)
            })
            .collect();
        nodes.push(PipelineNode::new(packing.port_parts[v].clone(), pipes));
    }
    net.run("pipeline", &mut nodes)?;
    Ok((collect_received(&nodes), loads))
}

/// Broadcast over a tree packing. The packing's construction rounds are
/// charged to the report so it compares fairly with [`basic_broadcast`].
pub fn k_broadcast(
    g: &Graph,
    inst: &BroadcastInstance,
    packing: &TreePacking,
    opts: &BroadcastOptions,
    seed: u64,
) -> Result<BroadcastOutcome, BroadcastError> {
    packing
        .partition
        .validate(g)
        .map_err(|e| BroadcastError::Precondition(e.to_string()))?;
    let mut net = Network::new(g, opts.sim, seed);
    net.charge("trees", packing.rounds);
    let (received, part_loads) = k_broadcast_on(&mut net, inst, packing)?;
    let ok = everyone_has_everything(&received, &inst.sorted_contents());
    let lambda = opts.lambda.unwrap_or_else(|| exact_edge_connectivity(g));
    let report = RunReport::from_network(&net, ok).with_broadcast_references(
        g.n(),
        inst.k(),
        g.min_degree(),
        lambda,
    );
    Ok(BroadcastOutcome {
        report,
        received,
        part_loads,
    })
}
