//! Distributed BFS, optionally run for several edge-disjoint parts at once.
//!
//! The root announces in round 1. A node first reached in round `t` takes
//! depth `t`, adopts the smallest-identifier announcer of that round as its
//! parent, and announces on all of its part's ports in round `t + 1`. The
//! announcement sent back to the chosen parent carries the `adopt` flag, so
//! parents learn their children without extra tokens.

use crate::graph::{Graph, NodeId};
use crate::sim::{NodeCtx, Outbox, Protocol, Token};

/// Port is not used by any part.
pub const NO_PART: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
pub struct Announce {
    pub adopt: bool,
}

impl Token for Announce {
    fn bit_size(&self) -> u32 {
        1
    }
}

#[derive(Debug, Clone, Default)]
pub struct PartBfs {
    pub reached: bool,
    pub depth: u64,
    pub parent_port: Option<usize>,
    pub child_ports: Vec<usize>,
    pending: bool,
}

#[derive(Debug, Clone)]
pub struct BfsNode {
    port_part: Vec<usize>,
    pub parts: Vec<PartBfs>,
}

impl BfsNode {
    pub fn new(port_part: Vec<usize>, parts: usize, is_root: bool) -> Self {
        let mut state = vec![PartBfs::default(); parts];
        if is_root {
            for p in &mut state {
                p.reached = true;
                p.pending = true;
            }
        }
        BfsNode {
            port_part,
            parts: state,
        }
    }
}

impl Protocol for BfsNode {
    type Msg = Announce;

    fn send(&mut self, _ctx: &mut NodeCtx<'_>, out: &mut Outbox<Announce>) {
        for (port, &part) in self.port_part.iter().enumerate() {
            if part == NO_PART || !self.parts[part].pending {
                continue;
            }
            let adopt = self.parts[part].parent_port == Some(port);
            out.send(port, Announce { adopt });
        }
        for p in &mut self.parts {
            p.pending = false;
        }
    }

    fn receive(&mut self, ctx: &mut NodeCtx<'_>, inbox: &[(usize, Announce)]) {
        let mut best: Vec<Option<(u64, usize)>> = vec![None; self.parts.len()];
        for &(port, msg) in inbox {
            let part = self.port_part[port];
            let st = &mut self.parts[part];
            if msg.adopt {
                st.child_ports.push(port);
            }
            if !st.reached {
                let key = (ctx.ports[port].neighbor, port);
                if best[part].is_none_or(|b| key < b) {
                    best[part] = Some(key);
                }
            }
        }
        for (part, choice) in best.into_iter().enumerate() {
            if let Some((_, port)) = choice {
                let st = &mut self.parts[part];
                st.reached = true;
                st.depth = ctx.round;
                st.parent_port = Some(port);
                st.pending = true;
            }
        }
    }

    fn is_done(&self) -> bool {
        self.parts.iter().all(|p| !p.pending)
    }
}

/// Global view of one BFS tree, assembled after a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BfsTree {
    pub root: NodeId,
    pub parent: Vec<Option<NodeId>>,
    pub depth: Vec<u64>,
    /// Port of each node towards its parent.
    pub parent_port: Vec<Option<usize>>,
    /// Ports of each node towards its children.
    pub child_ports: Vec<Vec<usize>>,
}

impl BfsTree {
    pub fn height(&self) -> u64 {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn children(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.parent.len()).filter(move |&u| self.parent[u] == Some(v))
    }

    /// The tree as a graph on the same nodes (parent edges only).
    pub fn as_graph(&self, g: &Graph) -> Graph {
        g.edge_subgraph(
            (0..self.parent.len())
                .filter_map(|v| self.parent[v].map(|p| g.find_edge(v, p).expect("tree edge"))),
        )
    }

    /// Hop diameter of the tree itself.
    pub fn diameter(&self, g: &Graph) -> u64 {
        crate::graph::exact_diameter(&self.as_graph(g)).unwrap_or(u64::MAX)
    }
}
