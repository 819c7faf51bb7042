use std::any::Any;
use std::time::Duration;

use super::filters::{MinRttFilter, WindowedMax};
use super::tunables::{BbrTunables, BbrVersion};
use super::{AckInfo, CcaKind, CongestionControl, LossInfo, LossKind};
use crate::rng::RngStream;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bbr1Mode {
    Startup,
    Drain,
    ProbeBw,
    ProbeRtt,
}

/// BBR version 1. Losses only matter through the rate samples; an RTO
/// collapses cwnd to in-flight until the next ACK restores it.
#[derive(Debug)]
pub struct Bbr1 {
    t: BbrTunables,
    mss: u64,
    rng: RngStream,
    mode: Bbr1Mode,

    bw: WindowedMax,
    min_rtt: MinRttFilter,
    round_count: u64,
    next_round_delivered: u64,
    round_start: bool,

    full_bw: f64,
    full_bw_count: u32,
    full_bw_reached: bool,

    cycle_idx: usize,
    cycle_stamp: SimTime,

    probe_rtt_done: Option<SimTime>,
    probe_rtt_round_done: bool,
    prior_cwnd: u64,
    idle_app_limited: bool,

    pacing_gain: f64,
    cwnd_gain: f64,
    pacing_rate: f64,
    cwnd: u64,
    has_seen_rtt: bool,
    restore_after_rto: bool,
}

impl Bbr1 {
    pub fn new(mss: u64, initial_cwnd_segments: u64, rng: RngStream) -> Self {
        let t = BbrTunables::for_version(BbrVersion::V1);
        let cwnd = initial_cwnd_segments * mss;
        // Until an RTT is measured, assume 1 ms.
        let pacing_rate = t.startup_pacing_gain * cwnd as f64 * 8.0 / 1e-3;
        Bbr1 {
            bw: WindowedMax::new(t.bw_filter_rounds),
            min_rtt: MinRttFilter::new(t.min_rtt_window),
            pacing_gain: t.startup_pacing_gain,
            cwnd_gain: t.startup_cwnd_gain,
            t,
            mss,
            rng,
            mode: Bbr1Mode::Startup,
            round_count: 0,
            next_round_delivered: 0,
            round_start: false,
            full_bw: 0.0,
            full_bw_count: 0,
            full_bw_reached: false,
            cycle_idx: 0,
            cycle_stamp: SimTime::ZERO,
            probe_rtt_done: None,
            probe_rtt_round_done: false,
            prior_cwnd: 0,
            idle_app_limited: false,
            pacing_rate,
            cwnd,
            has_seen_rtt: false,
            restore_after_rto: false,
        }
    }

    pub fn mode(&self) -> Bbr1Mode {
        self.mode
    }

    pub fn round_count(&self) -> u64 {
        self.round_count
    }

    pub fn min_rtt_stamp(&self) -> SimTime {
        self.min_rtt.stamp()
    }

    fn max_bw(&self) -> f64 {
        self.bw.get()
    }

    fn min_cwnd(&self) -> u64 {
        self.t.min_cwnd_segments * self.mss
    }

    /// BDP scaled by `gain`, in bytes.
    fn inflight(&self, bw: f64, gain: f64) -> u64 {
        match self.min_rtt.get() {
            Some(rtt) if bw > 0.0 => (bw / 8.0 * rtt.as_secs_f64() * gain) as u64,
            _ => 10 * self.mss,
        }
    }

    fn target_cwnd(&self, gain: f64) -> u64 {
        let mut cwnd = self.inflight(self.max_bw(), gain);
        // Quantization budget for the send and ack paths.
        cwnd += 3 * self.mss;
        if self.mode == Bbr1Mode::ProbeBw && self.cycle_idx == 0 {
            cwnd += 2 * self.mss;
        }
        cwnd
    }

    fn update_round(&mut self, ack: &AckInfo) {
        self.round_start = false;
        if ack.rs.newly_acked > 0 && ack.rs.prior_delivered >= self.next_round_delivered {
            self.next_round_delivered = ack.delivered;
            self.round_count += 1;
            self.round_start = true;
        }
    }

    fn update_bw(&mut self, ack: &AckInfo) {
        self.bw.expire(self.round_count);
        if let Some(rate) = ack.rs.delivery_rate {
            if !ack.rs.is_app_limited || rate >= self.max_bw() {
                self.bw.update(self.round_count, rate);
            }
        }
    }

    fn advance_cycle(&mut self, now: SimTime) {
        self.cycle_idx = (self.cycle_idx + 1) % self.t.probe_bw_cycle.len();
        self.cycle_stamp = now;
    }

    fn update_cycle_phase(&mut self, ack: &AckInfo) {
        if self.mode != Bbr1Mode::ProbeBw {
            return;
        }
        let gain = self.t.probe_bw_cycle[self.cycle_idx];
        let full_length = match self.min_rtt.get() {
            Some(rtt) => ack.now.saturating_since(self.cycle_stamp) > rtt,
            None => true,
        };
        let next = if gain == 1.0 {
            full_length
        } else if gain > 1.0 {
            full_length
                && (ack.rs.lost > 0 || ack.prior_in_flight >= self.inflight(self.max_bw(), gain))
        } else {
            full_length || ack.prior_in_flight <= self.inflight(self.max_bw(), 1.0)
        };
        if next {
            self.advance_cycle(ack.now);
        }
    }

    fn check_full_bw(&mut self, ack: &AckInfo) {
        if self.full_bw_reached || !self.round_start || ack.rs.is_app_limited {
            return;
        }
        if self.max_bw() >= self.full_bw * self.t.full_bw_growth {
            self.full_bw = self.max_bw();
            self.full_bw_count = 0;
            return;
        }
        self.full_bw_count += 1;
        self.full_bw_reached = self.full_bw_count >= self.t.full_bw_rounds;
    }

    fn enter_probe_bw(&mut self, now: SimTime) {
        self.mode = Bbr1Mode::ProbeBw;
        // Random start phase, never the draining one.
        let len = self.t.probe_bw_cycle.len() as u64;
        self.cycle_idx = (len - 1 - self.rng.range_u64(0, len - 1)) as usize;
        self.advance_cycle(now);
    }

    fn check_drain(&mut self, ack: &AckInfo) {
        if self.mode == Bbr1Mode::Startup && self.full_bw_reached {
            self.mode = Bbr1Mode::Drain;
        }
        if self.mode == Bbr1Mode::Drain && ack.in_flight <= self.inflight(self.max_bw(), 1.0) {
            self.enter_probe_bw(ack.now);
        }
    }

    fn update_min_rtt(&mut self, ack: &AckInfo) {
        let expired = self.min_rtt.is_expired(ack.now);
        if let Some(rtt) = ack.rs.rtt {
            self.min_rtt.update(rtt, ack.now);
        }
        if expired && !self.idle_app_limited && self.mode != Bbr1Mode::ProbeRtt {
            self.mode = Bbr1Mode::ProbeRtt;
            self.prior_cwnd = self.save_cwnd();
            self.probe_rtt_done = None;
        }
        if self.mode == Bbr1Mode::ProbeRtt {
            match self.probe_rtt_done {
                None if ack.in_flight <= self.min_cwnd() => {
                    self.probe_rtt_done = Some(ack.now + self.t.probe_rtt_duration);
                    self.probe_rtt_round_done = false;
                    self.next_round_delivered = ack.delivered;
                }
                None => {}
                Some(done) => {
                    if self.round_start {
                        self.probe_rtt_round_done = true;
                    }
                    if self.probe_rtt_round_done && ack.now >= done {
                        self.min_rtt.refresh(ack.now);
                        self.cwnd = self.cwnd.max(self.prior_cwnd);
                        if self.full_bw_reached {
                            self.enter_probe_bw(ack.now);
                        } else {
                            self.mode = Bbr1Mode::Startup;
                        }
                    }
                }
            }
        }
        self.idle_app_limited = false;
    }

    fn save_cwnd(&self) -> u64 {
        if self.mode == Bbr1Mode::ProbeRtt {
            self.prior_cwnd.max(self.cwnd)
        } else {
            self.cwnd
        }
    }

    fn update_gains(&mut self) {
        let (p, c) = match self.mode {
            Bbr1Mode::Startup => (self.t.startup_pacing_gain, self.t.startup_cwnd_gain),
            Bbr1Mode::Drain => (self.t.drain_pacing_gain, self.t.startup_cwnd_gain),
            Bbr1Mode::ProbeBw => (self.t.probe_bw_cycle[self.cycle_idx], self.t.cwnd_gain),
            Bbr1Mode::ProbeRtt => (1.0, 1.0),
        };
        self.pacing_gain = p;
        self.cwnd_gain = c;
    }

    fn set_pacing_rate(&mut self, ack: &AckInfo) {
        if !self.has_seen_rtt {
            if let Some(srtt) = ack.srtt.filter(|d| !d.is_zero()) {
                self.has_seen_rtt = true;
                self.pacing_rate =
                    self.t.startup_pacing_gain * self.cwnd as f64 * 8.0 / srtt.as_secs_f64();
            }
        }
        let bw = self.max_bw();
        if bw <= 0.0 {
            return;
        }
        let rate = self.pacing_gain * bw * (1.0 - self.t.pacing_margin);
        if self.full_bw_reached || rate > self.pacing_rate {
            self.pacing_rate = rate;
        }
    }

    fn set_cwnd(&mut self, ack: &AckInfo) {
        let acked = ack.rs.newly_acked;
        if self.restore_after_rto {
            self.restore_after_rto = false;
            self.cwnd = self.cwnd.max(self.prior_cwnd);
        }
        let target = self.target_cwnd(self.cwnd_gain);
        if self.full_bw_reached {
            self.cwnd = (self.cwnd + acked).min(target);
        } else if self.cwnd < target || ack.delivered < 10 * self.mss {
            self.cwnd += acked;
        }
        self.cwnd = self.cwnd.max(self.min_cwnd());
        if self.mode == Bbr1Mode::ProbeRtt {
            self.cwnd = self.cwnd.min(self.min_cwnd());
        }
    }
}

impl CongestionControl for Bbr1 {
    fn kind(&self) -> CcaKind {
        CcaKind::Bbr1
    }

    fn on_ack(&mut self, ack: &AckInfo) {
        self.update_round(ack);
        self.update_bw(ack);
        self.update_cycle_phase(ack);
        self.check_full_bw(ack);
        self.check_drain(ack);
        self.update_min_rtt(ack);
        self.update_gains();
        self.set_pacing_rate(ack);
        self.set_cwnd(ack);
    }

    fn on_loss(&mut self, loss: &LossInfo) {
        if loss.kind == LossKind::Rto && loss.new_event {
            self.prior_cwnd = self.save_cwnd();
            self.cwnd = (loss.in_flight + self.mss).max(self.min_cwnd());
            self.restore_after_rto = true;
        }
    }

    fn cwnd(&self) -> u64 {
        self.cwnd
    }

    fn pacing_rate(&self) -> Option<f64> {
        Some(self.pacing_rate)
    }

    fn pacing_gain(&self) -> Option<f64> {
        Some(self.pacing_gain)
    }

    fn state_name(&self) -> Option<String> {
        Some(match self.mode {
            Bbr1Mode::Startup => "Startup".into(),
            Bbr1Mode::Drain => "Drain".into(),
            Bbr1Mode::ProbeBw => format!("ProbeBW:{}", self.cycle_idx),
            Bbr1Mode::ProbeRtt => "ProbeRTT".into(),
        })
    }

    fn btl_bw(&self) -> Option<f64> {
        Some(self.max_bw())
    }

    fn min_rtt(&self) -> Option<Duration> {
        self.min_rtt.get()
    }

    fn wants_app_limited(&self) -> bool {
        self.mode == Bbr1Mode::ProbeRtt
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
