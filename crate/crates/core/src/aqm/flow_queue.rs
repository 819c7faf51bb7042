//! Flow-queueing scheduler shared by FQ-CoDel and CAKE: per-flow CoDel
//! queues served by deficit round robin over a new-flows list and an
//! old-flows list.

use std::collections::VecDeque;

use super::codel::{CodelParams, CodelQueue};
use super::{
    BucketBacklog, Dequeued, DropReason, Qdisc, QdiscConfig, QdiscKind, QdiscStats, Verdict,
};
use crate::packet::{FlowId, Packet};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum List {
    New,
    Old,
}

#[derive(Debug, Default)]
struct Bucket {
    queue: CodelQueue,
    deficit: i64,
    list: Option<List>,
}

#[derive(Debug)]
pub(crate) struct FlowScheduler {
    buckets: Vec<Bucket>,
    hash_modulus: u32,
    new_flows: VecDeque<u32>,
    old_flows: VecDeque<u32>,
    quantum: i64,
    memory_limit: u64,
    codel: CodelParams,
    packets: u64,
    bytes: u64,
    pub(crate) stats: QdiscStats,
}

impl FlowScheduler {
    pub(crate) fn new(cfg: &QdiscConfig) -> Self {
        let hash_modulus = cfg
            .forced_collision_buckets
            .unwrap_or(cfg.bucket_count)
            .min(cfg.bucket_count)
            .max(1);
        FlowScheduler {
            buckets: (0..cfg.bucket_count).map(|_| Bucket::default()).collect(),
            hash_modulus,
            new_flows: VecDeque::new(),
            old_flows: VecDeque::new(),
            quantum: i64::from(cfg.quantum),
            memory_limit: u64::from(cfg.memory_limit),
            codel: cfg.codel_params(),
            packets: 0,
            bytes: 0,
            stats: QdiscStats::default(),
        }
    }

    /// Flow ids are controlled by the simulator, so the identity hash is
    /// collision-free unless the forced-collision knob shrinks the modulus.
    pub(crate) fn bucket_of(&self, flow: FlowId) -> u32 {
        flow % self.hash_modulus
    }

    pub(crate) fn backlog(&self) -> usize {
        self.packets as usize
    }

    pub(crate) fn enqueue(&mut self, pkt: Packet, now: SimTime) -> Verdict {
        self.stats.arrivals += 1;
        let idx = self.bucket_of(pkt.flow_id);
        let size = u64::from(pkt.size);
        let b = &mut self.buckets[idx as usize];
        b.queue.push(pkt, now);
        if b.list.is_none() {
            b.list = Some(List::New);
            b.deficit = self.quantum;
            self.new_flows.push_back(idx);
        }
        self.packets += 1;
        self.bytes += size;

        if self.packets > self.memory_limit {
            let fattest = self.drop_from_fattest();
            if fattest == idx && self.buckets[idx as usize].queue.is_empty() {
                return Verdict::Dropped(DropReason::Overlimit);
            }
        }
        Verdict::Accepted
    }

    fn drop_from_fattest(&mut self) -> u32 {
        let (idx, _) = self
            .buckets
            .iter()
            .enumerate()
            .max_by_key(|(i, b)| (b.queue.bytes(), std::cmp::Reverse(*i)))
            .expect("at least one bucket");
        let dropped = self.buckets[idx]
            .queue
            .pop_head()
            .expect("fattest queue is non-empty");
        self.packets -= 1;
        self.bytes -= u64::from(dropped.size);
        self.stats.drops.overlimit += 1;
        idx as u32
    }

    pub(crate) fn dequeue(&mut self, now: SimTime) -> Option<Packet> {
        loop {
            let (list, idx) = if let Some(&i) = self.new_flows.front() {
                (List::New, i)
            } else if let Some(&i) = self.old_flows.front() {
                (List::Old, i)
            } else {
                return None;
            };
            let b = &mut self.buckets[idx as usize];

            if b.deficit <= 0 {
                b.deficit += self.quantum;
                b.list = Some(List::Old);
                self.pop_front(list);
                self.old_flows.push_back(idx);
                continue;
            }

            let before_pkts = b.queue.len() as u64;
            let before_bytes = b.queue.bytes();
            let (pkt, dropped) = b.queue.dequeue(now, &self.codel);
            let removed_pkts = before_pkts - b.queue.len() as u64;
            let removed_bytes = before_bytes - b.queue.bytes();
            self.packets -= removed_pkts;
            self.bytes -= removed_bytes;
            self.stats.drops.codel += u64::from(dropped);

            match pkt {
                Some(p) => {
                    b.deficit -= i64::from(p.size);
                    self.stats.dequeued += 1;
                    return Some(p);
                }
                None => {
                    // An emptied new flow goes to the back of the old list so
                    // it cannot starve old flows by re-entering as new.
                    let to_old = list == List::New && !self.old_flows.is_empty();
                    b.list = if to_old { Some(List::Old) } else { None };
                    self.pop_front(list);
                    if to_old {
                        self.old_flows.push_back(idx);
                    }
                }
            }
        }
    }

    fn pop_front(&mut self, list: List) {
        match list {
            List::New => self.new_flows.pop_front(),
            List::Old => self.old_flows.pop_front(),
        };
    }

    pub(crate) fn snapshot(&self) -> QdiscStats {
        let mut s = self.stats.clone();
        s.backlog_packets = self.packets;
        s.backlog_bytes = self.bytes;
        s.buckets = self
            .buckets
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.queue.is_empty())
            .map(|(i, b)| BucketBacklog {
                bucket: i as u32,
                packets: b.queue.len() as u32,
            })
            .collect();
        s
    }

    #[cfg(test)]
    fn check_list_membership(&self) -> bool {
        self.buckets.iter().enumerate().all(|(i, b)| {
            let i = i as u32;
            let in_new = self.new_flows.iter().filter(|&&x| x == i).count();
            let in_old = self.old_flows.iter().filter(|&&x| x == i).count();
            let listed = in_new + in_old;
            let consistent = match b.list {
                None => listed == 0,
                Some(List::New) => in_new == 1 && in_old == 0,
                Some(List::Old) => in_old == 1 && in_new == 0,
            };
            consistent && (b.queue.is_empty() || listed == 1)
        })
    }
}

/// FQ-CoDel: flow isolation by DRR with CoDel on each flow queue.
#[derive(Debug)]
pub struct FqCodel {
    sched: FlowScheduler,
}

impl FqCodel {
    pub fn new(cfg: &QdiscConfig) -> Self {
        FqCodel {
            sched: FlowScheduler::new(cfg),
        }
    }
}

impl Qdisc for FqCodel {
    fn kind(&self) -> QdiscKind {
        QdiscKind::FqCodel
    }

    fn enqueue(&mut self, pkt: Packet, now: SimTime) -> Verdict {
        self.sched.enqueue(pkt, now)
    }

    fn dequeue(&mut self, now: SimTime) -> Dequeued {
        match self.sched.dequeue(now) {
            Some(p) => Dequeued::Packet(p),
            None => Dequeued::Empty,
        }
    }

    fn backlog(&self) -> usize {
        self.sched.backlog()
    }

    fn stats(&self) -> QdiscStats {
        self.sched.snapshot()
    }
}
