//! CoDel delay-based dropper, applied at dequeue time.
//!
//! Follows the reference pseudocode: a packet becomes droppable once the
//! sojourn time has stayed above `target` for a full `interval`; while in the
//! dropping state the next drop is scheduled at
//! `drop_next + interval / sqrt(count)`.

use std::collections::VecDeque;
use std::time::Duration;

use crate::packet::Packet;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CodelParams {
    pub target: Duration,
    pub interval: Duration,
    /// Backlog at or below this many bytes never triggers a drop.
    pub mtu: u32,
}

impl Default for CodelParams {
    fn default() -> Self {
        CodelParams {
            target: Duration::from_millis(5),
            interval: Duration::from_millis(100),
            mtu: crate::packet::MAX_PACKET_BYTES,
        }
    }
}

/// `t + interval / sqrt(count)`.
pub fn control_law(t: SimTime, interval: Duration, count: u32) -> SimTime {
    let step = interval.as_nanos() as f64 / f64::from(count.max(1)).sqrt();
    t + Duration::from_nanos(step as u64)
}

#[derive(Clone, Debug, Default)]
pub struct CodelState {
    pub dropping: bool,
    pub drop_next: SimTime,
    pub count: u32,
    pub last_count: u32,
    /// `None` while sojourn is below target.
    pub first_above_time: Option<SimTime>,
}

/// FIFO of packets governed by one CoDel instance.
#[derive(Clone, Debug, Default)]
pub struct CodelQueue {
    packets: VecDeque<Packet>,
    bytes: u64,
    pub state: CodelState,
}

impl CodelQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    pub fn push(&mut self, mut pkt: Packet, now: SimTime) {
        pkt.enqueued_at = now;
        self.bytes += u64::from(pkt.size);
        self.packets.push_back(pkt);
    }

    /// Removes the head without running the AQM (overlimit drops).
    pub fn pop_head(&mut self) -> Option<Packet> {
        let p = self.packets.pop_front()?;
        self.bytes -= u64::from(p.size);
        Some(p)
    }

    fn do_dequeue(&mut self, now: SimTime, p: &CodelParams) -> (Option<Packet>, bool) {
        let Some(pkt) = self.pop_head() else {
            self.state.first_above_time = None;
            return (None, false);
        };
        let sojourn = now.saturating_since(pkt.enqueued_at);
        let mut ok_to_drop = false;
        if sojourn < p.target || self.bytes <= u64::from(p.mtu) {
            self.state.first_above_time = None;
        } else {
            match self.state.first_above_time {
                None => self.state.first_above_time = Some(now + p.interval),
                Some(t) if now >= t => ok_to_drop = true,
                Some(_) => {}
            }
        }
        (Some(pkt), ok_to_drop)
    }

    /// Returns the next packet to transmit and the number of packets CoDel
    /// dropped on the way.
    pub fn dequeue(&mut self, now: SimTime, p: &CodelParams) -> (Option<Packet>, u32) {
        let mut dropped = 0;
        let (mut pkt, mut ok_to_drop) = self.do_dequeue(now, p);
        if pkt.is_none() {
            self.state.dropping = false;
            return (None, 0);
        }
        if self.state.dropping {
            if !ok_to_drop {
                self.state.dropping = false;
            }
            while self.state.dropping && now >= self.state.drop_next {
                dropped += 1;
                self.state.count += 1;
                (pkt, ok_to_drop) = self.do_dequeue(now, p);
                if !ok_to_drop {
                    self.state.dropping = false;
                } else {
                    self.state.drop_next =
                        control_law(self.state.drop_next, p.interval, self.state.count);
                }
            }
        } else if ok_to_drop {
            dropped += 1;
            (pkt, _) = self.do_dequeue(now, p);
            self.state.dropping = true;
            let delta = self.state.count.saturating_sub(self.state.last_count);
            self.state.count = 1;
            let recently = now.saturating_since(self.state.drop_next) < p.interval * 16;
            if delta > 1 && recently {
                self.state.count = delta;
            }
            self.state.drop_next = control_law(now, p.interval, self.state.count);
            self.state.last_count = self.state.count;
        }
        (pkt, dropped)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Packet> {
        self.packets.iter()
    }
}
