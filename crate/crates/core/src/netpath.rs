//! Rate-limited bottleneck path: qdisc, serializing transmitter, propagation
//! delay and optional Wi-Fi style impairments.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::aqm::{Dequeued, DropReason, Qdisc, QdiscConfig, QdiscStats, Verdict};
use crate::packet::Packet;
use crate::rng::RngStream;
use crate::time::{serialization_delay, SimTime};

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JitterModel {
    #[default]
    None,
    /// Extra propagation delay drawn uniformly from `[0, max_ms]`.
    Uniform { max_ms: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub rate_bps: f64,
    /// One-way propagation delay.
    pub prop_delay_ms: f64,
    pub jitter: JitterModel,
    /// Per-packet Bernoulli loss before the qdisc.
    pub loss_prob: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            rate_bps: 10_000_000.0,
            prop_delay_ms: 5.0,
            jitter: JitterModel::None,
            loss_prob: 0.0,
        }
    }
}

impl LinkConfig {
    pub fn prop_delay(&self) -> Duration {
        Duration::from_secs_f64(self.prop_delay_ms / 1e3)
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.rate_bps > 0.0) || !self.rate_bps.is_finite() {
            errs.push("link.rate_bps must be > 0".into());
        }
        if !(self.prop_delay_ms >= 0.0) {
            errs.push("link.prop_delay_ms must be >= 0".into());
        }
        if !(0.0..1.0).contains(&self.loss_prob) {
            errs.push("link.loss_prob must be in [0, 1)".into());
        }
        if let JitterModel::Uniform { max_ms } = self.jitter {
            if !(max_ms >= 0.0) {
                errs.push("link.jitter.max_ms must be >= 0".into());
            }
        }
        errs
    }
}

/// Events a path asks its owner to schedule.
#[derive(Clone, Debug, PartialEq)]
pub enum PathEvent {
    /// The packet in serialization has left the transmitter.
    TransmitComplete,
    /// The shaper may release a packet now.
    Wake,
    /// Packet reaches the far end.
    Deliver(Packet),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathCounters {
    pub random_losses: u64,
    pub transmitted_packets: u64,
    pub transmitted_bytes: u64,
}

/// One direction of the bottleneck.
pub struct DirectionalPath {
    link: LinkConfig,
    prop_delay: Duration,
    qdisc: Box<dyn Qdisc>,
    rng: RngStream,
    in_service: Option<Packet>,
    busy_until: SimTime,
    wake_pending: bool,
    counters: PathCounters,
}

impl DirectionalPath {
    pub fn new(link: LinkConfig, qdisc: &QdiscConfig, rng: RngStream) -> Self {
        let q = qdisc.build(link.rate_bps);
        Self::with_qdisc(link, q, rng)
    }

    pub fn with_qdisc(link: LinkConfig, qdisc: Box<dyn Qdisc>, rng: RngStream) -> Self {
        DirectionalPath {
            prop_delay: link.prop_delay(),
            link,
            qdisc,
            rng,
            in_service: None,
            busy_until: SimTime::ZERO,
            wake_pending: false,
            counters: PathCounters::default(),
        }
    }

    pub fn link(&self) -> &LinkConfig {
        &self.link
    }

    pub fn is_busy(&self) -> bool {
        self.in_service.is_some()
    }

    pub fn busy_until(&self) -> SimTime {
        self.busy_until
    }

    pub fn qdisc_stats(&self) -> QdiscStats {
        self.qdisc.stats()
    }

    pub fn backlog(&self) -> usize {
        self.qdisc.backlog()
    }

    pub fn counters(&self) -> PathCounters {
        self.counters
    }

    /// Offers `pkt` to the path. Drops are reported in the verdict.
    pub fn send(
        &mut self,
        pkt: Packet,
        now: SimTime,
        sched: &mut dyn FnMut(SimTime, PathEvent),
    ) -> Verdict {
        debug_assert!(pkt.is_well_formed(), "malformed packet {pkt:?}");
        if self.link.loss_prob > 0.0 && self.rng.uniform() < self.link.loss_prob {
            self.counters.random_losses += 1;
            return Verdict::Dropped(DropReason::RandomLoss);
        }
        let verdict = self.qdisc.enqueue(pkt, now);
        if verdict == Verdict::Accepted && !self.is_busy() && !self.wake_pending {
            self.start_next(now, sched);
        }
        verdict
    }

    fn start_next(&mut self, now: SimTime, sched: &mut dyn FnMut(SimTime, PathEvent)) {
        debug_assert!(self.in_service.is_none());
        match self.qdisc.dequeue(now) {
            Dequeued::Packet(p) => {
                let done = now + serialization_delay(p.size, self.link.rate_bps);
                self.busy_until = done;
                self.in_service = Some(p);
                sched(done, PathEvent::TransmitComplete);
            }
            Dequeued::NotBefore(at) => {
                self.wake_pending = true;
                sched(at, PathEvent::Wake);
            }
            Dequeued::Empty => {}
        }
    }

    pub fn on_transmit_complete(
        &mut self,
        now: SimTime,
        sched: &mut dyn FnMut(SimTime, PathEvent),
    ) {
        let p = self
            .in_service
            .take()
            .expect("transmit completion without a packet in service");
        self.counters.transmitted_packets += 1;
        self.counters.transmitted_bytes += u64::from(p.size);
        let mut delay = self.prop_delay;
        if let JitterModel::Uniform { max_ms } = self.link.jitter {
            delay += Duration::from_secs_f64(self.rng.uniform() * max_ms / 1e3);
        }
        sched(now + delay, PathEvent::Deliver(p));
        self.start_next(now, sched);
    }

    pub fn on_wake(&mut self, now: SimTime, sched: &mut dyn FnMut(SimTime, PathEvent)) {
        self.wake_pending = false;
        if !self.is_busy() {
            self.start_next(now, sched);
        }
    }
}
