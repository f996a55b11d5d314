//! Item numbering over a BFS tree: counts are summed bottom-up, then the
//! root hands out contiguous identifier ranges top-down, children served in
//! increasing identifier order.

use std::ops::Range;

use crate::graph::bit_len;
use crate::sim::{NodeCtx, Outbox, Protocol, Token};

#[derive(Debug, Clone, Copy)]
pub enum SweepMsg {
    /// Items in the sender's subtree.
    Count(u64),
    /// First identifier of the receiver's range.
    Start(u64),
}

impl Token for SweepMsg {
    fn bit_size(&self) -> u32 {
        match *self {
            SweepMsg::Count(x) | SweepMsg::Start(x) => bit_len(x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepNode {
    own: u64,
    parent_port: Option<usize>,
    /// `(child label, port, subtree count once reported)`
    children: Vec<(u64, usize, Option<u64>)>,
    count_sent: bool,
    start: Option<u64>,
    starts_sent: bool,
}

impl SweepNode {
    pub fn new(
        own: u64,
        parent_port: Option<usize>,
        child_ports: &[usize],
        labels: &[u64],
    ) -> Self {
        let mut children: Vec<_> = child_ports.iter().map(|&p| (labels[p], p, None)).collect();
        children.sort_unstable();
        SweepNode {
            own,
            parent_port,
            children,
            count_sent: false,
            start: None,
            starts_sent: false,
        }
    }

    fn subtree(&self) -> Option<u64> {
        self.children
            .iter()
            .try_fold(self.own, |acc, c| c.2.map(|x| acc + x))
    }

    /// Identifiers assigned to this node's own items (1-based).
    pub fn range(&self) -> Option<Range<u64>> {
        self.start.map(|s| s..s + self.own)
    }
}

impl Protocol for SweepNode {
    type Msg = SweepMsg;

    fn send(&mut self, _ctx: &mut NodeCtx<'_>, out: &mut Outbox<SweepMsg>) {
        if !self.count_sent {
            if let Some(total) = self.subtree() {
                match self.parent_port {
                    Some(p) => out.send(p, SweepMsg::Count(total)),
                    None => self.start = Some(1),
                }
                self.count_sent = true;
            }
        }
        if let (Some(start), false) = (self.start, self.starts_sent) {
            let mut next = start + self.own;
            for &(_, port, count) in &self.children {
                out.send(port, SweepMsg::Start(next));
                next += count.expect("all children reported before ranges go down");
            }
            self.starts_sent = true;
        }
    }

    fn receive(&mut self, _ctx: &mut NodeCtx<'_>, inbox: &[(usize, SweepMsg)]) {
        for &(port, msg) in inbox {
            match msg {
                SweepMsg::Count(x) => {
                    if let Some(c) = self.children.iter_mut().find(|c| c.1 == port) {
                        c.2 = Some(x);
                    }
                }
                SweepMsg::Start(s) => self.start = Some(s),
            }
        }
    }

    fn is_done(&self) -> bool {
        // Waiting for children or for a range is idle, not pending.
        let count_due = !self.count_sent && self.subtree().is_some();
        let starts_due = self.start.is_some() && !self.starts_sent;
        !count_due && !starts_due
    }
}
