//! Pipelined convergecast + broadcast over one tree per part.
//!
//! Non-root holders push their items towards the root, one token per round
//! on the parent edge, FIFO. The root streams every item it owns or
//! receives down to all children, one per round; inner nodes forward what
//! they get from their parent the same way.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::sim::{NodeCtx, Outbox, Protocol, Token};

/// Opaque message content of `bits` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Payload {
    pub value: u64,
    pub bits: u32,
}

impl Payload {
    pub fn new(value: u64, bits: u32) -> Self {
        debug_assert!(
            bits >= 64 || value >> bits == 0,
            "value wider than its bit size"
        );
        Payload { value, bits }
    }
}

impl Token for Payload {
    fn bit_size(&self) -> u32 {
        self.bits
    }
}

#[derive(Debug, Clone, Default)]
pub struct PartPipe {
    parent_port: Option<usize>,
    child_ports: Vec<usize>,
    up: VecDeque<Payload>,
    down: VecDeque<Payload>,
    pub received: Vec<Payload>,
}

impl PartPipe {
    pub fn new(parent_port: Option<usize>, child_ports: Vec<usize>, own: Vec<Payload>) -> Self {
        let mut pipe = PartPipe {
            parent_port,
            child_ports,
            ..PartPipe::default()
        };
        for item in own {
            pipe.accept_local(item);
        }
        pipe
    }

    fn accept_local(&mut self, item: Payload) {
        if self.parent_port.is_some() {
            self.up.push_back(item);
        } else {
            self.deliver(item);
        }
    }

    fn deliver(&mut self, item: Payload) {
        self.received.push(item);
        if !self.child_ports.is_empty() {
            self.down.push_back(item);
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineNode {
    port_part: Vec<usize>,
    pub parts: Vec<PartPipe>,
}

impl PipelineNode {
    pub fn new(port_part: Vec<usize>, parts: Vec<PartPipe>) -> Self {
        PipelineNode { port_part, parts }
    }

    /// Everything this node received across all parts.
    pub fn received(&self) -> impl Iterator<Item = &Payload> {
        self.parts.iter().flat_map(|p| p.received.iter())
    }
}

impl Protocol for PipelineNode {
    type Msg = Payload;

    fn send(&mut self, _ctx: &mut NodeCtx<'_>, out: &mut Outbox<Payload>) {
        for part in &mut self.parts {
            if let Some(pp) = part.parent_port {
                if let Some(item) = part.up.pop_front() {
                    out.send(pp, item);
                }
            }
            if let Some(item) = part.down.pop_front() {
                for &c in &part.child_ports {
                    out.send(c, item);
                }
            }
        }
    }

    fn receive(&mut self, _ctx: &mut NodeCtx<'_>, inbox: &[(usize, Payload)]) {
        for &(port, item) in inbox {
            let part = &mut self.parts[self.port_part[port]];
            if part.parent_port == Some(port) {
                part.deliver(item);
            } else {
                part.accept_local(item);
            }
        }
    }

    fn is_done(&self) -> bool {
        self.parts
            .iter()
            .all(|p| p.up.is_empty() && p.down.is_empty())
    }
}
