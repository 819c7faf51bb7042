//! Bottleneck queue disciplines: PFIFO, FQ-CoDel and a reduced CAKE.

mod cake;
pub mod codel;
mod flow_queue;
mod pfifo;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::packet::{Packet, MAX_PACKET_BYTES};
use crate::time::SimTime;

pub use cake::Cake;
pub use codel::{CodelParams, CodelQueue};
pub use flow_queue::FqCodel;
pub use pfifo::Pfifo;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QdiscKind {
    Pfifo,
    FqCodel,
    Cake,
}

impl QdiscKind {
    pub const ALL: [QdiscKind; 3] = [QdiscKind::Pfifo, QdiscKind::FqCodel, QdiscKind::Cake];

    pub fn as_str(self) -> &'static str {
        match self {
            QdiscKind::Pfifo => "pfifo",
            QdiscKind::FqCodel => "fq_codel",
            QdiscKind::Cake => "cake",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pfifo" => Some(QdiscKind::Pfifo),
            "fq_codel" | "fq-codel" | "fqcodel" => Some(QdiscKind::FqCodel),
            "cake" => Some(QdiscKind::Cake),
            _ => None,
        }
    }
}

impl fmt::Display for QdiscKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Queue discipline parameters, as carried in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QdiscConfig {
    pub kind: QdiscKind,
    /// PFIFO capacity in packets.
    pub pfifo_limit: u32,
    pub codel_target_ms: f64,
    pub codel_interval_ms: f64,
    /// DRR quantum in bytes.
    pub quantum: u32,
    pub bucket_count: u32,
    /// Total packets buffered across all flow queues before fat-queue drops.
    pub memory_limit: u32,
    /// Shaper rate for CAKE in bits/s; `None` inherits the link rate.
    pub cake_rate: Option<f64>,
    /// Test knob: hash flows into `flow_id % n` buckets to force collisions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forced_collision_buckets: Option<u32>,
}

impl Default for QdiscConfig {
    fn default() -> Self {
        QdiscConfig {
            kind: QdiscKind::Pfifo,
            pfifo_limit: 50,
            codel_target_ms: 5.0,
            codel_interval_ms: 100.0,
            quantum: 1514,
            bucket_count: 1024,
            memory_limit: 10_240,
            cake_rate: None,
            forced_collision_buckets: None,
        }
    }
}

impl QdiscConfig {
    pub fn of_kind(kind: QdiscKind) -> Self {
        QdiscConfig {
            kind,
            ..Self::default()
        }
    }

    pub fn codel_params(&self) -> CodelParams {
        CodelParams {
            target: Duration::from_secs_f64(self.codel_target_ms / 1e3),
            interval: Duration::from_secs_f64(self.codel_interval_ms / 1e3),
            mtu: MAX_PACKET_BYTES,
        }
    }

    /// Returns every violated constraint.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.pfifo_limit < 1 {
            errs.push("qdisc.pfifo_limit must be >= 1".into());
        }
        if !(self.codel_target_ms > 0.0) {
            errs.push("qdisc.codel_target_ms must be > 0".into());
        }
        if !(self.codel_target_ms < self.codel_interval_ms) {
            errs.push("qdisc.codel_target_ms must be < qdisc.codel_interval_ms".into());
        }
        if self.quantum < MAX_PACKET_BYTES {
            errs.push(format!(
                "qdisc.quantum must be >= max packet size ({MAX_PACKET_BYTES})"
            ));
        }
        if self.bucket_count < 1 {
            errs.push("qdisc.bucket_count must be >= 1".into());
        }
        if self.memory_limit < 1 {
            errs.push("qdisc.memory_limit must be >= 1".into());
        }
        if let Some(r) = self.cake_rate {
            if !(r > 0.0) {
                errs.push("qdisc.cake_rate must be > 0".into());
            }
        }
        if self.forced_collision_buckets == Some(0) {
            errs.push("qdisc.forced_collision_buckets must be >= 1".into());
        }
        errs
    }

    /// Builds a qdisc; `link_rate_bps` feeds CAKE's inherited shaper rate.
    pub fn build(&self, link_rate_bps: f64) -> Box<dyn Qdisc> {
        match self.kind {
            QdiscKind::Pfifo => Box::new(Pfifo::new(self.pfifo_limit)),
            QdiscKind::FqCodel => Box::new(FqCodel::new(self)),
            QdiscKind::Cake => Box::new(Cake::new(self, self.cake_rate.unwrap_or(link_rate_bps))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Buffer full on arrival.
    Tail,
    /// Memory limit exceeded; head of the fattest flow queue dropped.
    Overlimit,
    /// Sojourn-time AQM drop.
    Codel,
    /// Bernoulli link loss, applied before the qdisc.
    RandomLoss,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    Dropped(DropReason),
}

#[derive(Debug, PartialEq)]
pub enum Dequeued {
    Packet(Packet),
    Empty,
    /// A packet is buffered but the shaper holds it until the given time.
    NotBefore(SimTime),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    pub tail: u64,
    pub overlimit: u64,
    pub codel: u64,
}

impl DropCounts {
    pub fn total(&self) -> u64 {
        self.tail + self.overlimit + self.codel
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketBacklog {
    pub bucket: u32,
    pub packets: u32,
}

/// Snapshot of a qdisc's counters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QdiscStats {
    /// Every packet offered to `enqueue`, accepted or not.
    pub arrivals: u64,
    pub dequeued: u64,
    pub drops: DropCounts,
    pub backlog_packets: u64,
    pub backlog_bytes: u64,
    /// Non-empty buckets only.
    pub buckets: Vec<BucketBacklog>,
}

impl QdiscStats {
    /// `arrivals == dequeued + dropped + buffered`.
    pub fn is_conserved(&self) -> bool {
        self.arrivals == self.dequeued + self.drops.total() + self.backlog_packets
    }
}

pub trait Qdisc: Send {
    fn kind(&self) -> QdiscKind;

    fn enqueue(&mut self, pkt: Packet, now: SimTime) -> Verdict;

    fn dequeue(&mut self, now: SimTime) -> Dequeued;

    /// Packets currently buffered.
    fn backlog(&self) -> usize;

    fn stats(&self) -> QdiscStats;
}
