use std::collections::BTreeMap;

use crate::packet::{FlowId, Packet, MAX_SACK_BLOCKS};
use crate::time::SimTime;

/// Acknowledges every data segment immediately with the highest in-order
/// byte received plus SACK blocks for out-of-order data.
#[derive(Clone, Debug, Default)]
pub struct Receiver {
    flow_id: FlowId,
    rcv_nxt: u64,
    /// Out-of-order segments: start -> end.
    ooo: BTreeMap<u64, u64>,
    segments_received: u64,
}

impl Receiver {
    pub fn new(flow_id: FlowId) -> Self {
        Receiver {
            flow_id,
            ..Default::default()
        }
    }

    pub fn rcv_nxt(&self) -> u64 {
        self.rcv_nxt
    }

    pub fn segments_received(&self) -> u64 {
        self.segments_received
    }

    /// Adds `[start, end)` to the out-of-order set, merging touching blocks.
    fn insert_ooo(&mut self, mut start: u64, mut end: u64) {
        if let Some((&s, &e)) = self.ooo.range(..=start).next_back() {
            if e >= start {
                self.ooo.remove(&s);
                start = s;
                end = end.max(e);
            }
        }
        while let Some((&s, &e)) = self.ooo.range(start..).next() {
            if s > end {
                break;
            }
            self.ooo.remove(&s);
            end = end.max(e);
        }
        self.ooo.insert(start, end);
    }

    pub fn on_data(&mut self, pkt: &Packet, now: SimTime) -> Packet {
        debug_assert!(!pkt.is_ack);
        self.segments_received += 1;
        let start = pkt.seq_no;
        let end = start + u64::from(pkt.payload_len());
        if end > self.rcv_nxt {
            if start <= self.rcv_nxt {
                self.rcv_nxt = end;
            } else {
                self.insert_ooo(start, end);
            }
            while let Some((&s, &e)) = self.ooo.first_key_value() {
                if s > self.rcv_nxt {
                    break;
                }
                self.ooo.pop_first();
                self.rcv_nxt = self.rcv_nxt.max(e);
            }
        }
        let mut ack = Packet::ack(self.flow_id, self.rcv_nxt, now);
        ack.sack = self.sack_blocks(start);
        ack
    }

    /// The block holding `seq` first, then the others from the highest down.
    fn sack_blocks(&self, seq: u64) -> Vec<(u64, u64)> {
        let mut blocks = Vec::new();
        let current = self.ooo.range(..=seq).next_back().filter(|(_, &e)| e > seq);
        if let Some((&s, &e)) = current {
            blocks.push((s, e));
        }
        for (&s, &e) in self.ooo.iter().rev() {
            if blocks.len() == MAX_SACK_BLOCKS {
                break;
            }
            if current.is_none_or(|(&cs, _)| cs != s) {
                blocks.push((s, e));
            }
        }
        blocks
    }
}
