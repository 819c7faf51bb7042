//! Reduced CAKE: flow-isolating DRR with per-flow CoDel behind an integrated
//! token-free shaper.
//!
//! This is a simplification of the full discipline. Host isolation, diffserv
//! tins, ACK filtering, overhead compensation and the BLUE half of COBALT are
//! not modelled; what remains is per-flow isolation, per-flow delay control
//! and a shaper that never releases packets faster than its configured rate.

use std::time::Duration;

use super::flow_queue::FlowScheduler;
use super::{Dequeued, Qdisc, QdiscConfig, QdiscKind, QdiscStats, Verdict};
use crate::packet::Packet;
use crate::time::{serialization_delay, SimTime};

#[derive(Debug)]
pub struct Cake {
    sched: FlowScheduler,
    rate_bps: f64,
    /// Earliest time the shaper releases the next packet.
    next_departure: SimTime,
}

impl Cake {
    pub fn new(cfg: &QdiscConfig, rate_bps: f64) -> Self {
        assert!(rate_bps > 0.0, "cake shaper rate must be positive");
        Cake {
            sched: FlowScheduler::new(cfg),
            rate_bps,
            next_departure: SimTime::ZERO,
        }
    }

    pub fn rate_bps(&self) -> f64 {
        self.rate_bps
    }

    fn spacing(&self, bytes: u32) -> Duration {
        serialization_delay(bytes, self.rate_bps)
    }
}

impl Qdisc for Cake {
    fn kind(&self) -> QdiscKind {
        QdiscKind::Cake
    }

    fn enqueue(&mut self, pkt: Packet, now: SimTime) -> Verdict {
        self.sched.enqueue(pkt, now)
    }

    fn dequeue(&mut self, now: SimTime) -> Dequeued {
        if self.sched.backlog() == 0 {
            return Dequeued::Empty;
        }
        if now < self.next_departure {
            return Dequeued::NotBefore(self.next_departure);
        }
        match self.sched.dequeue(now) {
            Some(p) => {
                // No credit accumulates while idle.
                self.next_departure = self.next_departure.max(now) + self.spacing(p.size);
                Dequeued::Packet(p)
            }
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

#[cfg(test)]
mod tests {
    use super::*;

    fn cake() -> Cake {
        Cake::new(&QdiscConfig::of_kind(QdiscKind::Cake), 10e6)
    }

    #[test]
    fn back_to_back_departures_are_spaced_by_rate() {
        let mut q = cake();
        for i in 0..10 {
            q.enqueue(Packet::data(1, i, SimTime::ZERO), SimTime::ZERO);
        }
        let mut t = SimTime::ZERO;
        let mut departures = Vec::new();
        while departures.len() < 10 {
            match q.dequeue(t) {
                Dequeued::Packet(_) => departures.push(t),
                Dequeued::NotBefore(at) => t = at,
                Dequeued::Empty => panic!("backlog lost"),
            }
        }
        for w in departures.windows(2) {
            assert!(w[1] - w[0] >= Duration::from_micros(1200));
        }
    }

    #[test]
    fn shaper_rate_bound_over_window() {
        // Offer 20 Mbps for a second; at most 10 Mbps may depart in any
        // 100 ms window.
        let mut q = cake();
        let mut t = SimTime::ZERO;
        let mut departures: Vec<(SimTime, u32)> = Vec::new();
        let mut next_arrival = SimTime::ZERO;
        let end = SimTime::from_secs(1);
        while t < end {
            while next_arrival <= t {
                q.enqueue(Packet::data(1 + (departures.len() as u32 % 3), 0, next_arrival), next_arrival);
                next_arrival += Duration::from_micros(600);
            }
            match q.dequeue(t) {
                Dequeued::Packet(p) => departures.push((t, p.size)),
                Dequeued::NotBefore(at) => t = at.min(next_arrival),
                Dequeued::Empty => t = next_arrival,
            }
        }
        let win = Duration::from_millis(100);
        for (i, &(start, _)) in departures.iter().enumerate() {
            let bytes: u64 = departures[i..]
                .iter()
                .take_while(|(d, _)| *d < start + win)
                .map(|(_, s)| u64::from(*s))
                .sum();
            // One packet of slack for the window edge.
            assert!(bytes * 8 <= (10e6 * 0.1) as u64 + 1500 * 8, "window at {start}: {bytes} B");
        }
    }

    #[test]
    fn idle_shaper_does_not_bank_credit() {
        let mut q = cake();
        q.enqueue(Packet::data(1, 0, SimTime::ZERO), SimTime::ZERO);
        assert!(matches!(q.dequeue(SimTime::ZERO), Dequeued::Packet(_)));
        let later = SimTime::from_secs(5);
        q.enqueue(Packet::data(1, 1, later), later);
        q.enqueue(Packet::data(1, 2, later), later);
        assert!(matches!(q.dequeue(later), Dequeued::Packet(_)));
        assert_eq!(
            q.dequeue(later),
            Dequeued::NotBefore(later + Duration::from_micros(1200))
        );
    }
}
