//! Discrete-event engine: a virtual clock and an ordered event queue.
//!
//! Events are ordered by `(fire_at, seq)` where `seq` is a counter assigned at
//! scheduling time, so events sharing a timestamp fire in the order they were
//! scheduled. Cancellation is lazy: a cancelled event stays in the heap as a
//! tombstone and is discarded when it reaches the front.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use crate::time::SimTime;

/// Opaque token returned by [`Engine::schedule`], used to cancel an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn seq(self) -> u64 {
        self.0
    }
}

/// An event popped from the queue.
#[derive(Debug)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub payload: P,
}

struct Entry<P> {
    fire_at: SimTime,
    seq: u64,
    payload: P,
}

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<P> Eq for Entry<P> {}

impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Entry<P> {
    // BinaryHeap is a max-heap; invert so the earliest (fire_at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Summary returned by [`Engine::run_until`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSummary {
    pub events_processed: u64,
    pub final_time: SimTime,
}

/// Single-threaded event queue with a monotone virtual clock.
pub struct Engine<P> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Entry<P>>,
    cancelled: HashSet<u64>,
    processed: u64,
}

impl<P> Default for Engine<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Engine<P> {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn events_processed(&self) -> u64 {
        self.processed
    }

    /// Number of live (non-cancelled) events still queued.
    pub fn pending(&self) -> usize {
        self.heap.len() - self.cancelled.len()
    }

    /// Queues `payload` to fire at `fire_at`.
    ///
    /// # Panics
    ///
    /// Scheduling before the current time is a causality violation and aborts
    /// the run.
    pub fn schedule(&mut self, fire_at: SimTime, payload: P) -> EventHandle {
        assert!(
            fire_at >= self.now,
            "causality violation: event scheduled at {fire_at} while clock is at {}",
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry {
            fire_at,
            seq,
            payload,
        });
        EventHandle(seq)
    }

    /// Cancels a queued event. Returns false if it already fired or was
    /// already cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if handle.0 >= self.next_seq || !self.heap.iter().any(|e| e.seq == handle.0) {
            return false;
        }
        self.cancelled.insert(handle.0)
    }

    /// Pops the next live event with `fire_at <= t_end`, advancing the clock.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<Event<P>> {
        loop {
            let top = self.heap.peek()?;
            if top.fire_at > t_end {
                return None;
            }
            let entry = self.heap.pop().expect("peeked");
            if !self.cancelled.is_empty() && self.cancelled.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.fire_at >= self.now);
            self.now = entry.fire_at;
            self.processed += 1;
            return Some(Event {
                fire_at: entry.fire_at,
                seq: entry.seq,
                payload: entry.payload,
            });
        }
    }

    /// Moves the clock forward to `t` without processing anything.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }

    /// Processes every event with `fire_at <= t_end` through `handler`, then
    /// leaves the clock at `t_end`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> RunSummary
    where
        F: FnMut(&mut Engine<P>, Event<P>),
    {
        let start = self.processed;
        while let Some(ev) = self.pop_until(t_end) {
            handler(self, ev);
        }
        self.advance_to(t_end);
        RunSummary {
            events_processed: self.processed - start,
            final_time: self.now,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_at_zero_is_delivered_first() {
        let mut e = Engine::new();
        e.schedule(SimTime::from_millis(1), "later");
        e.schedule(SimTime::ZERO, "first");
        let mut seen = Vec::new();
        e.run_until(SimTime::from_secs(1), |_, ev| seen.push(ev.payload));
        assert_eq!(seen, ["first", "later"]);
    }

    #[test]
    fn ties_fire_in_scheduling_order() {
        let mut e = Engine::new();
        let t = SimTime::from_millis(5);
        let a = e.schedule(t, 1);
        let b = e.schedule(t, 2);
        assert!(a.seq() < b.seq());
        let mut seen = Vec::new();
        e.run_until(SimTime::from_secs(1), |_, ev| seen.push(ev.payload));
        assert_eq!(seen, [1, 2]);
    }

    #[test]
    fn cancelled_event_never_fires() {
        let mut e = Engine::new();
        let h = e.schedule(SimTime::from_millis(5), "x");
        e.schedule(SimTime::from_millis(6), "y");
        assert!(e.cancel(h));
        assert!(!e.cancel(h));
        let mut seen = Vec::new();
        e.run_until(SimTime::from_secs(1), |_, ev| seen.push(ev.payload));
        assert_eq!(seen, ["y"]);
    }

    #[test]
    fn empty_queue_advances_clock_to_horizon() {
        let mut e: Engine<()> = Engine::new();
        let s = e.run_until(SimTime::from_secs(120), |_, _| {});
        assert_eq!(s.events_processed, 0);
        assert_eq!(e.now(), SimTime::from_secs(120));
    }

    #[test]
    fn event_inside_horizon_is_processed() {
        let mut e = Engine::new();
        e.schedule(SimTime::from_secs(60), ());
        let s = e.run_until(SimTime::from_secs(120), |_, _| {});
        assert_eq!(s.events_processed, 1);
        assert_eq!(s.final_time, SimTime::from_secs(120));
    }

    #[test]
    fn event_past_horizon_stays_queued() {
        let mut e = Engine::new();
        e.schedule(SimTime::from_secs(121), ());
        let s = e.run_until(SimTime::from_secs(120), |_, _| {});
        assert_eq!(s.events_processed, 0);
        assert_eq!(e.pending(), 1);
    }

    #[test]
    #[should_panic(expected = "causality violation")]
    fn scheduling_into_the_past_aborts() {
        let mut e = Engine::new();
        e.schedule(SimTime::from_secs(2), ());
        e.run_until(SimTime::from_secs(3), |_, _| {});
        e.schedule(SimTime::from_secs(1), ());
    }

    #[test]
    fn handlers_can_schedule_follow_ups() {
        let mut e = Engine::new();
        e.schedule(SimTime::ZERO, 0u32);
        let mut count = 0;
        e.run_until(SimTime::from_millis(10), |eng, ev| {
            count += 1;
            let now = eng.now();
            eng.schedule(now + std::time::Duration::from_millis(1), ev.payload + 1);
        });
        assert_eq!(count, 11);
    }
}
