use std::collections::VecDeque;

use crate::traffic::Packet;

/// Fluid remainders below this many bits are treated as zero.
pub const BIT_EPSILON: f64 = 1e-9;

/// Part of a packet moving out of a queue in one transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chunk {
    pub packet: Packet,
    pub bits: f64,
    /// The packet's last bit left with this chunk.
    pub completes: bool,
}

/// FIFO buffer at the BS or the relay.
///
/// Service is bit-granular. The head packet may be partly sent
/// (`head_transferred_bits`); at the relay the tail packet may be partly
/// received (`tail_missing_bits`).
#[derive(Debug, Clone, Default)]
pub struct NodeQueue {
    resident: VecDeque<Packet>,
    resident_size_bits: u64,
    head_transferred_bits: f64,
    tail_missing_bits: f64,
    trace: Vec<f64>,
}

impl NodeQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn occupancy_bits(&self) -> f64 {
        self.resident_size_bits as f64 - self.head_transferred_bits - self.tail_missing_bits
    }

    pub fn is_empty(&self) -> bool {
        self.resident.is_empty()
    }

    pub fn len(&self) -> usize {
        self.resident.len()
    }

    pub fn packets(&self) -> impl Iterator<Item = &Packet> {
        self.resident.iter()
    }

    pub fn head_transferred_bits(&self) -> f64 {
        self.head_transferred_bits
    }

    /// Appends a complete packet.
    pub fn push(&mut self, packet: Packet) {
        debug_assert!(self.tail_missing_bits == 0.0);
        self.resident_size_bits += packet.size_bits;
        self.resident.push_back(packet);
    }

    /// Removes up to `max_bits` from the head in FIFO order.
    pub fn drain(&mut self, max_bits: f64) -> Vec<Chunk> {
        let mut out = Vec::new();
        let mut budget = max_bits;
        while budget > BIT_EPSILON {
            let only = self.resident.len() == 1;
            let Some(head) = self.resident.front().copied() else { break };
            let size = head.size_bits as f64;
            let missing = if only { self.tail_missing_bits } else { 0.0 };
            let available = size - self.head_transferred_bits - missing;
            if available <= BIT_EPSILON {
                break;
            }
            let take = budget.min(available);
            let remaining = size - self.head_transferred_bits - take;
            if missing == 0.0 && remaining <= BIT_EPSILON {
                let bits = size - self.head_transferred_bits;
                budget -= bits;
                self.resident.pop_front();
                self.resident_size_bits -= head.size_bits;
                self.head_transferred_bits = 0.0;
                out.push(Chunk {
                    packet: head,
                    bits,
                    completes: true,
                });
            } else {
                budget -= take;
                self.head_transferred_bits += take;
                out.push(Chunk {
                    packet: head,
                    bits: take,
                    completes: false,
                });
            }
        }
        out
    }

    /// Accepts chunks drained from the upstream queue.
    pub fn receive(&mut self, chunks: &[Chunk]) {
        for chunk in chunks {
            let continues_tail = self
                .resident
                .back()
                .is_some_and(|p| p.id == chunk.packet.id && self.tail_missing_bits > 0.0);
            if !continues_tail {
                debug_assert!(self.tail_missing_bits == 0.0);
                self.resident_size_bits += chunk.packet.size_bits;
                self.resident.push_back(chunk.packet);
                self.tail_missing_bits = chunk.packet.size_bits as f64;
            }
            if chunk.completes {
                self.tail_missing_bits = 0.0;
            } else {
                self.tail_missing_bits -= chunk.bits;
            }
        }
    }

    pub fn record(&mut self) {
        self.trace.push(self.occupancy_bits());
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<f64> {
        std::mem::take(&mut self.trace)
    }
}
