use std::collections::VecDeque;

use super::{BucketBacklog, Dequeued, DropReason, Qdisc, QdiscKind, QdiscStats, Verdict};
use crate::packet::Packet;
use crate::time::SimTime;

/// Packet-count-limited FIFO with tail drop.
#[derive(Debug)]
pub struct Pfifo {
    limit: usize,
    queue: VecDeque<Packet>,
    bytes: u64,
    stats: QdiscStats,
}

impl Pfifo {
    pub fn new(limit: u32) -> Self {
        Pfifo {
            limit: limit as usize,
            queue: VecDeque::with_capacity(limit as usize),
            bytes: 0,
            stats: QdiscStats::default(),
        }
    }
}

impl Qdisc for Pfifo {
    fn kind(&self) -> QdiscKind {
        QdiscKind::Pfifo
    }

    fn enqueue(&mut self, mut pkt: Packet, now: SimTime) -> Verdict {
        self.stats.arrivals += 1;
        if self.queue.len() >= self.limit {
            self.stats.drops.tail += 1;
            return Verdict::Dropped(DropReason::Tail);
        }
        pkt.enqueued_at = now;
        self.bytes += u64::from(pkt.size);
        self.queue.push_back(pkt);
        Verdict::Accepted
    }

    fn dequeue(&mut self, _now: SimTime) -> Dequeued {
        match self.queue.pop_front() {
            Some(p) => {
                self.bytes -= u64::from(p.size);
                self.stats.dequeued += 1;
                Dequeued::Packet(p)
            }
            None => Dequeued::Empty,
        }
    }

    fn backlog(&self) -> usize {
        self.queue.len()
    }

    fn stats(&self) -> QdiscStats {
        let mut s = self.stats.clone();
        s.backlog_packets = self.queue.len() as u64;
        s.backlog_bytes = self.bytes;
        if !self.queue.is_empty() {
            s.buckets = vec![BucketBacklog {
                bucket: 0,
                packets: self.queue.len() as u32,
            }];
        }
        s
    }
}
