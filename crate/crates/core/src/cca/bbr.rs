//! BBR versions 2 and 3: a shared state machine with loss-bounded probing,
//! parameterised by [`BbrTunables`].

use std::any::Any;
use std::time::Duration;

use super::filters::{MinRttFilter, WindowedMax};
use super::tunables::{BbrTunables, BbrVersion};
use super::{AckInfo, CcaKind, CongestionControl, LossInfo, LossKind, RateSample};
use crate::rng::RngStream;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BbrMode {
    Startup,
    Drain,
    Down,
    Cruise,
    Refill,
    Up,
    ProbeRtt,
}

impl BbrMode {
    pub fn is_probe_bw(self) -> bool {
        matches!(self, BbrMode::Down | BbrMode::Cruise | BbrMode::Refill | BbrMode::Up)
    }

    fn is_probing_bw(self) -> bool {
        matches!(self, BbrMode::Startup | BbrMode::Refill | BbrMode::Up)
    }

    pub fn name(self) -> &'static str {
        match self {
            BbrMode::Startup => "Startup",
            BbrMode::Drain => "Drain",
            BbrMode::Down => "ProbeBW:DOWN",
            BbrMode::Cruise => "ProbeBW:CRUISE",
            BbrMode::Refill => "ProbeBW:REFILL",
            BbrMode::Up => "ProbeBW:UP",
            BbrMode::ProbeRtt => "ProbeRTT",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum AckPhase {
    Init,
    ProbeStarting,
    ProbeFeedback,
    ProbeStopping,
    Refilling,
}

const INF: u64 = u64::MAX;

#[derive(Debug)]
pub struct Bbr {
    t: BbrTunables,
    mss: u64,
    initial_cwnd: u64,
    rng: RngStream,
    mode: BbrMode,

    max_bw_filter: WindowedMax,
    cycle_count: u64,
    /// min(max_bw, bw_lo).
    bw: f64,
    min_rtt: MinRttFilter,
    probe_rtt_min: MinRttFilter,

    round_count: u64,
    round_start: bool,
    next_round_delivered: u64,

    full_bw: f64,
    full_bw_count: u32,
    full_bw_reached: bool,

    inflight_hi: u64,
    inflight_lo: u64,
    bw_lo: f64,
    bw_latest: f64,
    inflight_latest: u64,

    loss_in_round: bool,
    loss_round_start: bool,
    loss_round_delivered: u64,
    loss_events_in_round: u32,
    round_lost_bytes: u64,
    round_start_delivered: u64,
    loss_rate_in_round: f64,
    newly_lost: u64,

    bw_probe_samples: bool,
    bw_probe_up_rounds: u32,
    bw_probe_up_acks: u64,
    probe_up_cnt: u64,
    rounds_since_probe: u64,
    bw_probe_wait: Duration,
    cycle_stamp: SimTime,
    ack_phase: AckPhase,

    probe_rtt_expired: bool,
    probe_rtt_done: Option<SimTime>,
    probe_rtt_round_done: bool,
    prior_cwnd: u64,
    in_recovery: bool,
    packet_conservation: bool,
    conservation_round: u64,

    pacing_gain: f64,
    cwnd_gain: f64,
    pacing_rate: f64,
    cwnd: u64,
    has_seen_rtt: bool,
    app_limited_request: bool,
}

impl Bbr {
    pub fn new(version: BbrVersion, mss: u64, initial_cwnd_segments: u64, rng: RngStream) -> Self {
        assert!(version != BbrVersion::V1, "v1 has its own implementation");
        Self::with_tunables(BbrTunables::for_version(version), mss, initial_cwnd_segments, rng)
    }

    pub fn with_tunables(t: BbrTunables, mss: u64, initial_cwnd_segments: u64, rng: RngStream) -> Self {
        let cwnd = initial_cwnd_segments * mss;
        let pacing_rate = t.startup_pacing_gain * cwnd as f64 * 8.0 / 1e-3;
        Bbr {
            max_bw_filter: WindowedMax::new(2),
            min_rtt: MinRttFilter::new(t.min_rtt_window),
            probe_rtt_min: MinRttFilter::new(t.probe_rtt_interval),
            pacing_gain: t.startup_pacing_gain,
            cwnd_gain: t.startup_cwnd_gain,
            t,
            mss,
            initial_cwnd: cwnd,
            rng,
            mode: BbrMode::Startup,
            cycle_count: 0,
            bw: 0.0,
            round_count: 0,
            round_start: false,
            next_round_delivered: 0,
            full_bw: 0.0,
            full_bw_count: 0,
            full_bw_reached: false,
            inflight_hi: INF,
            inflight_lo: INF,
            bw_lo: f64::INFINITY,
            bw_latest: 0.0,
            inflight_latest: 0,
            loss_in_round: false,
            loss_round_start: false,
            loss_round_delivered: 0,
            loss_events_in_round: 0,
            round_lost_bytes: 0,
            round_start_delivered: 0,
            loss_rate_in_round: 0.0,
            newly_lost: 0,
            bw_probe_samples: false,
            bw_probe_up_rounds: 0,
            bw_probe_up_acks: 0,
            probe_up_cnt: INF,
            rounds_since_probe: 0,
            bw_probe_wait: Duration::ZERO,
            cycle_stamp: SimTime::ZERO,
            ack_phase: AckPhase::Init,
            probe_rtt_expired: false,
            probe_rtt_done: None,
            probe_rtt_round_done: false,
            prior_cwnd: 0,
            in_recovery: false,
            packet_conservation: false,
            conservation_round: 0,
            pacing_rate,
            cwnd,
            has_seen_rtt: false,
            app_limited_request: false,
        }
    }

    pub fn tunables(&self) -> &BbrTunables {
        &self.t
    }

    pub fn mode(&self) -> BbrMode {
        self.mode
    }

    /// `None` while unbounded.
    pub fn inflight_hi(&self) -> Option<u64> {
        (self.inflight_hi != INF).then_some(self.inflight_hi)
    }

    pub fn inflight_lo(&self) -> Option<u64> {
        (self.inflight_lo != INF).then_some(self.inflight_lo)
    }

    pub fn loss_rate_in_round(&self) -> f64 {
        self.loss_rate_in_round
    }

    pub fn rounds_since_probe(&self) -> u64 {
        self.rounds_since_probe
    }

    pub fn min_rtt_stamp(&self) -> SimTime {
        self.min_rtt.stamp()
    }

    fn max_bw(&self) -> f64 {
        self.max_bw_filter.get()
    }

    fn min_pipe_cwnd(&self) -> u64 {
        self.t.min_cwnd_segments * self.mss
    }

    fn bdp_multiple(&self, bw: f64, gain: f64) -> u64 {
        match self.min_rtt.get() {
            Some(rtt) => (gain * bw / 8.0 * rtt.as_secs_f64()) as u64,
            None => self.initial_cwnd,
        }
    }

    fn quantization_budget(&self, inflight: u64) -> u64 {
        let mut inflight = inflight.max(3 * self.mss).max(self.min_pipe_cwnd());
        if self.mode == BbrMode::Up {
            inflight += 2 * self.mss;
        }
        inflight
    }

    fn inflight(&self, bw: f64, gain: f64) -> u64 {
        self.quantization_budget(self.bdp_multiple(bw, gain))
    }

    fn inflight_with_headroom(&self) -> u64 {
        if self.inflight_hi == INF {
            return INF;
        }
        let headroom = (((1.0 - self.t.headroom) * self.inflight_hi as f64) as u64).max(self.mss);
        self.inflight_hi.saturating_sub(headroom).max(self.min_pipe_cwnd())
    }

    fn target_inflight(&self) -> u64 {
        self.bdp_multiple(self.bw, 1.0).min(self.cwnd)
    }

    fn probe_rtt_cwnd(&self) -> u64 {
        self.bdp_multiple(self.bw, self.t.probe_rtt_cwnd_gain).max(self.min_pipe_cwnd())
    }

    fn start_round(&mut self, delivered: u64) {
        self.next_round_delivered = delivered;
    }

    fn update_round(&mut self, ack: &AckInfo) {
        self.round_start = false;
        if ack.rs.newly_acked > 0 && ack.rs.prior_delivered >= self.next_round_delivered {
            self.start_round(ack.delivered);
            self.round_count += 1;
            self.rounds_since_probe += 1;
            self.round_start = true;
        }
    }

    fn update_latest_delivery_signals(&mut self, ack: &AckInfo) {
        self.loss_round_start = false;
        if let Some(rate) = ack.rs.delivery_rate {
            self.bw_latest = self.bw_latest.max(rate);
        }
        self.inflight_latest = self.inflight_latest.max(ack.rs.delivered);
        if ack.rs.newly_acked > 0 && ack.rs.prior_delivered >= self.loss_round_delivered {
            self.loss_round_delivered = ack.delivered;
            self.loss_round_start = true;
            let delivered = ack.delivered - self.round_start_delivered;
            self.loss_rate_in_round = if delivered + self.round_lost_bytes > 0 {
                self.round_lost_bytes as f64 / (delivered + self.round_lost_bytes) as f64
            } else {
                0.0
            };
            self.round_lost_bytes = 0;
            self.round_start_delivered = ack.delivered;
        }
    }

    fn advance_latest_delivery_signals(&mut self, ack: &AckInfo) {
        if self.loss_round_start {
            self.bw_latest = ack.rs.delivery_rate.unwrap_or(0.0);
            self.inflight_latest = ack.rs.delivered;
        }
    }

    fn update_max_bw(&mut self, ack: &AckInfo) {
        self.update_round(ack);
        self.max_bw_filter.expire(self.cycle_count);
        if let Some(rate) = ack.rs.delivery_rate {
            if rate >= self.max_bw() || !ack.rs.is_app_limited {
                self.max_bw_filter.update(self.cycle_count, rate);
            }
        }
    }

    fn update_congestion_signals(&mut self, ack: &AckInfo) {
        self.update_max_bw(ack);
        if ack.rs.lost > 0 {
            self.loss_in_round = true;
        }
        if !self.loss_round_start {
            return;
        }
        if !self.mode.is_probing_bw() && self.loss_in_round {
            if self.bw_lo.is_infinite() {
                self.bw_lo = self.max_bw();
            }
            if self.inflight_lo == INF {
                self.inflight_lo = self.cwnd;
            }
            self.bw_lo = self.bw_latest.max(self.t.beta * self.bw_lo);
            self.inflight_lo = self
                .inflight_latest
                .max((self.t.beta * self.inflight_lo as f64) as u64);
        }
        self.loss_in_round = false;
    }

    fn reset_lower_bounds(&mut self) {
        self.bw_lo = f64::INFINITY;
        self.inflight_lo = INF;
    }

    fn reset_congestion_signals(&mut self) {
        self.loss_in_round = false;
        self.bw_latest = 0.0;
        self.inflight_latest = 0;
    }

    fn reset_full_bw(&mut self) {
        self.full_bw = 0.0;
        self.full_bw_count = 0;
    }

    fn check_startup_full_bandwidth(&mut self, ack: &AckInfo) {
        if self.full_bw_reached || !self.round_start || ack.rs.is_app_limited {
            return;
        }
        if self.max_bw() >= self.full_bw * self.t.full_bw_growth {
            self.reset_full_bw();
            self.full_bw = self.max_bw();
            return;
        }
        self.full_bw_count += 1;
        self.full_bw_reached = self.full_bw_count >= self.t.full_bw_rounds;
    }

    fn check_startup_high_loss(&mut self, ack: &AckInfo) {
        if self.full_bw_reached || self.mode != BbrMode::Startup {
            return;
        }
        if self.loss_round_start
            && self.in_recovery
            && self.loss_events_in_round >= self.t.startup_full_loss_count
            && is_inflight_too_high(&ack.rs, self.t.loss_thresh)
        {
            self.full_bw_reached = true;
            let bdp = self.bdp_multiple(self.max_bw(), 1.0);
            self.inflight_hi = if self.t.startup_loss_uses_latest_inflight {
                bdp.max(self.inflight_latest)
            } else {
                bdp
            };
        }
        if self.loss_round_start {
            self.loss_events_in_round = 0;
        }
    }

    fn check_startup_done(&mut self, ack: &AckInfo) {
        self.check_startup_full_bandwidth(ack);
        self.check_startup_high_loss(ack);
        if self.mode == BbrMode::Startup && self.full_bw_reached {
            self.mode = BbrMode::Drain;
            self.pacing_gain = self.t.drain_pacing_gain;
            self.cwnd_gain = self.t.startup_cwnd_gain;
        }
    }

    fn check_drain_done(&mut self, ack: &AckInfo) {
        if self.mode == BbrMode::Drain && ack.in_flight <= self.inflight(self.max_bw(), 1.0) {
            self.enter_probe_bw(ack);
        }
    }

    fn enter_probe_bw(&mut self, ack: &AckInfo) {
        self.cwnd_gain = self.t.cwnd_gain;
        self.start_down(ack);
    }

    fn pick_probe_wait(&mut self) {
        self.rounds_since_probe = self.rng.range_u64(0, 2);
        let spread = self.rng.uniform() * self.t.probe_wait_rand.as_secs_f64();
        self.bw_probe_wait = self.t.probe_wait_base + Duration::from_secs_f64(spread);
    }

    fn start_down(&mut self, ack: &AckInfo) {
        self.reset_congestion_signals();
        self.probe_up_cnt = INF;
        self.pick_probe_wait();
        self.cycle_stamp = ack.now;
        self.ack_phase = AckPhase::ProbeStopping;
        self.start_round(ack.delivered);
        self.mode = BbrMode::Down;
        self.pacing_gain = self.t.down_pacing_gain;
        self.cwnd_gain = self.t.cwnd_gain;
    }

    fn start_cruise(&mut self) {
        self.mode = BbrMode::Cruise;
        self.pacing_gain = self.t.cruise_pacing_gain;
        self.cwnd_gain = self.t.cwnd_gain;
    }

    fn start_refill(&mut self, ack: &AckInfo) {
        self.reset_lower_bounds();
        self.bw_probe_up_rounds = 0;
        self.bw_probe_up_acks = 0;
        self.ack_phase = AckPhase::Refilling;
        self.start_round(ack.delivered);
        self.mode = BbrMode::Refill;
        self.pacing_gain = self.t.refill_pacing_gain;
        self.cwnd_gain = self.t.cwnd_gain;
    }

    fn start_up(&mut self, ack: &AckInfo) {
        self.ack_phase = AckPhase::ProbeStarting;
        self.start_round(ack.delivered);
        self.reset_full_bw();
        self.full_bw = ack.rs.delivery_rate.unwrap_or(0.0);
        self.mode = BbrMode::Up;
        self.pacing_gain = self.t.up_pacing_gain;
        self.cwnd_gain = self.t.up_cwnd_gain;
        self.raise_inflight_hi_slope();
    }

    fn raise_inflight_hi_slope(&mut self) {
        let growth = 1u64 << self.bw_probe_up_rounds.min(30);
        self.bw_probe_up_rounds = (self.bw_probe_up_rounds + 1).min(30);
        // Segments to ACK per segment of inflight_hi growth.
        self.probe_up_cnt = (self.cwnd / self.mss / growth).max(1);
    }

    fn probe_inflight_hi_upward(&mut self, ack: &AckInfo) {
        let cwnd_limited = ack.prior_in_flight + self.mss >= self.cwnd;
        if !cwnd_limited || self.cwnd < self.inflight_hi {
            return;
        }
        self.bw_probe_up_acks += ack.rs.newly_acked;
        let step = self.probe_up_cnt.saturating_mul(self.mss);
        if self.bw_probe_up_acks >= step {
            let delta = self.bw_probe_up_acks / step;
            self.bw_probe_up_acks -= delta * step;
            self.inflight_hi = self.inflight_hi.saturating_add(delta * self.mss);
        }
        if self.round_start {
            self.raise_inflight_hi_slope();
        }
    }

    fn handle_inflight_too_high(&mut self, ack_now: SimTime, rs: &RateSample, delivered: u64) {
        self.bw_probe_samples = false;
        if !rs.is_app_limited {
            let floor = (self.target_inflight() as f64 * self.t.beta) as u64;
            self.inflight_hi = rs.tx_in_flight.max(floor);
        }
        if self.mode == BbrMode::Up {
            let fake = AckInfo {
                now: ack_now,
                rs: *rs,
                delivered,
                prior_in_flight: 0,
                in_flight: 0,
                in_recovery: self.in_recovery,
                srtt: None,
            };
            self.start_down(&fake);
        }
    }

    /// Returns true when the sample shows excessive loss.
    fn check_inflight_too_high(&mut self, ack: &AckInfo) -> bool {
        if is_inflight_too_high(&ack.rs, self.t.loss_thresh) {
            if self.bw_probe_samples {
                self.handle_inflight_too_high(ack.now, &ack.rs, ack.delivered);
            }
            return true;
        }
        false
    }

    fn adapt_upper_bounds(&mut self, ack: &AckInfo) {
        if self.ack_phase == AckPhase::ProbeStarting && self.round_start {
            self.ack_phase = AckPhase::ProbeFeedback;
        }
        if self.ack_phase == AckPhase::ProbeStopping && self.round_start {
            // Samples from the probe are in; rotate the max filter once.
            self.bw_probe_samples = false;
            self.ack_phase = AckPhase::Init;
            if self.mode.is_probe_bw() && !ack.rs.is_app_limited {
                self.cycle_count += 1;
                self.max_bw_filter.expire(self.cycle_count);
            }
        }
        if !self.check_inflight_too_high(ack) {
            if self.inflight_hi == INF {
                return;
            }
            if ack.rs.tx_in_flight > self.inflight_hi {
                self.inflight_hi = ack.rs.tx_in_flight;
            }
            if self.mode == BbrMode::Up {
                self.probe_inflight_hi_upward(ack);
            }
        }
    }

    fn has_elapsed_in_phase(&self, now: SimTime, d: Duration) -> bool {
        now > self.cycle_stamp + d
    }

    fn is_reno_coexistence_probe_time(&self) -> bool {
        let reno_rounds = self.target_inflight() / self.mss;
        self.rounds_since_probe >= reno_rounds.min(self.t.probe_max_rounds)
    }

    fn check_time_to_probe_bw(&mut self, ack: &AckInfo) -> bool {
        if self.has_elapsed_in_phase(ack.now, self.bw_probe_wait) || self.is_reno_coexistence_probe_time() {
            self.start_refill(ack);
            return true;
        }
        false
    }

    fn check_time_to_cruise(&self, in_flight: u64) -> bool {
        if in_flight > self.inflight_with_headroom() {
            return false;
        }
        in_flight <= self.inflight(self.max_bw(), 1.0)
    }

    fn update_probe_bw_cycle_phase(&mut self, ack: &AckInfo) {
        if !self.full_bw_reached {
            return;
        }
        self.adapt_upper_bounds(ack);
        match self.mode {
            BbrMode::Down => {
                if self.check_time_to_probe_bw(ack) {
                    return;
                }
                if self.check_time_to_cruise(ack.in_flight) {
                    self.start_cruise();
                }
            }
            BbrMode::Cruise => {
                self.check_time_to_probe_bw(ack);
            }
            BbrMode::Refill => {
                if self.round_start {
                    self.bw_probe_samples = true;
                    self.start_up(ack);
                }
            }
            BbrMode::Up => {
                let elapsed = self
                    .min_rtt
                    .get()
                    .is_none_or(|rtt| self.has_elapsed_in_phase(ack.now, rtt));
                if elapsed && ack.in_flight > self.inflight(self.max_bw(), self.t.up_pacing_gain) {
                    self.start_down(ack);
                }
            }
            _ => {}
        }
    }

    fn update_min_rtt(&mut self, ack: &AckInfo) {
        self.probe_rtt_expired = self.probe_rtt_min.is_expired(ack.now);
        if let Some(rtt) = ack.rs.rtt {
            self.probe_rtt_min.update(rtt, ack.now);
        }
        if let Some(candidate) = self.probe_rtt_min.get() {
            let better = self.min_rtt.get().is_none_or(|m| candidate < m);
            if better || self.min_rtt.is_expired(ack.now) {
                self.min_rtt.set(candidate, self.probe_rtt_min.stamp());
            }
        }
    }

    fn save_cwnd(&mut self) {
        if !self.in_recovery && self.mode != BbrMode::ProbeRtt {
            self.prior_cwnd = self.cwnd;
        } else {
            self.prior_cwnd = self.prior_cwnd.max(self.cwnd);
        }
    }

    fn restore_cwnd(&mut self) {
        self.cwnd = self.cwnd.max(self.prior_cwnd);
    }

    fn check_probe_rtt(&mut self, ack: &AckInfo) {
        if self.mode != BbrMode::ProbeRtt && self.probe_rtt_expired {
            self.mode = BbrMode::ProbeRtt;
            self.pacing_gain = 1.0;
            self.cwnd_gain = self.t.probe_rtt_cwnd_gain;
            self.save_cwnd();
            self.probe_rtt_done = None;
            self.ack_phase = AckPhase::ProbeStopping;
            self.start_round(ack.delivered);
        }
        if self.mode == BbrMode::ProbeRtt {
            self.app_limited_request = true;
            match self.probe_rtt_done {
                None if ack.in_flight <= self.probe_rtt_cwnd() => {
                    self.probe_rtt_done = Some(ack.now + self.t.probe_rtt_duration);
                    self.probe_rtt_round_done = false;
                    self.start_round(ack.delivered);
                }
                None => {}
                Some(done) => {
                    if self.round_start {
                        self.probe_rtt_round_done = true;
                    }
                    if self.probe_rtt_round_done && ack.now > done {
                        self.probe_rtt_min.refresh(ack.now);
                        self.restore_cwnd();
                        self.exit_probe_rtt(ack);
                    }
                }
            }
        } else {
            self.app_limited_request = false;
        }
    }

    fn exit_probe_rtt(&mut self, ack: &AckInfo) {
        self.reset_lower_bounds();
        self.app_limited_request = false;
        if self.full_bw_reached {
            self.start_down(ack);
            self.start_cruise();
        } else {
            self.mode = BbrMode::Startup;
            self.pacing_gain = self.t.startup_pacing_gain;
            self.cwnd_gain = self.t.startup_cwnd_gain;
        }
    }

    fn bound_bw_for_model(&mut self) {
        self.bw = self.max_bw().min(self.bw_lo);
    }

    fn set_pacing_rate(&mut self, ack: &AckInfo) {
        if !self.has_seen_rtt {
            if let Some(srtt) = ack.srtt.filter(|d| !d.is_zero()) {
                self.has_seen_rtt = true;
                self.pacing_rate =
                    self.t.startup_pacing_gain * self.cwnd as f64 * 8.0 / srtt.as_secs_f64();
            }
        }
        if self.bw <= 0.0 {
            return;
        }
        let rate = self.pacing_gain * self.bw * (1.0 - self.t.pacing_margin);
        if self.full_bw_reached || rate > self.pacing_rate {
            self.pacing_rate = rate;
        }
    }

    fn set_cwnd(&mut self, ack: &AckInfo) {
        let max_inflight = self.quantization_budget(self.bdp_multiple(self.bw, self.cwnd_gain));
        if self.packet_conservation && self.round_count > self.conservation_round {
            self.packet_conservation = false;
        }
        if self.newly_lost > 0 {
            self.cwnd = self.cwnd.saturating_sub(self.newly_lost).max(self.mss);
            self.newly_lost = 0;
        }
        let acked = ack.rs.newly_acked;
        if self.packet_conservation {
            self.cwnd = self.cwnd.max(ack.in_flight + acked);
        } else {
            if self.full_bw_reached {
                self.cwnd = (self.cwnd + acked).min(max_inflight);
            } else if self.cwnd < max_inflight || ack.delivered < self.initial_cwnd {
                self.cwnd += acked;
            }
            self.cwnd = self.cwnd.max(self.min_pipe_cwnd());
        }
        if self.mode == BbrMode::ProbeRtt {
            self.cwnd = self.cwnd.min(self.probe_rtt_cwnd());
        }
        let mut cap = INF;
        if self.mode.is_probe_bw() && self.mode != BbrMode::Cruise {
            cap = self.inflight_hi;
        } else if matches!(self.mode, BbrMode::ProbeRtt | BbrMode::Cruise) {
            cap = self.inflight_with_headroom();
        }
        cap = cap.min(self.inflight_lo).max(self.min_pipe_cwnd());
        self.cwnd = self.cwnd.min(cap).max(self.min_pipe_cwnd());
    }
}

/// Loss exceeded `thresh` of what was in flight when the sampled packet
/// left.
fn is_inflight_too_high(rs: &RateSample, thresh: f64) -> bool {
    rs.lost as f64 > rs.tx_in_flight as f64 * thresh
}

/// Inflight level at which the loss rate crossed `thresh`, estimated from
/// the packet that pushed it over.
fn inflight_hi_from_lost_packet(tx_in_flight: u64, lost: u64, size: u64, thresh: f64) -> u64 {
    let inflight_prev = tx_in_flight.saturating_sub(size) as f64;
    let lost_prev = lost.saturating_sub(size) as f64;
    let lost_prefix = ((thresh * inflight_prev - lost_prev) / (1.0 - thresh)).max(0.0);
    (inflight_prev + lost_prefix) as u64
}

impl CongestionControl for Bbr {
    fn kind(&self) -> CcaKind {
        match self.t.version {
            BbrVersion::V3 => CcaKind::Bbr3,
            _ => CcaKind::Bbr2,
        }
    }

    fn on_ack(&mut self, ack: &AckInfo) {
        self.update_latest_delivery_signals(ack);
        self.update_congestion_signals(ack);
        self.check_startup_done(ack);
        self.check_drain_done(ack);
        self.update_probe_bw_cycle_phase(ack);
        self.update_min_rtt(ack);
        self.check_probe_rtt(ack);
        self.advance_latest_delivery_signals(ack);
        self.bound_bw_for_model();
        self.set_pacing_rate(ack);
        self.set_cwnd(ack);
    }

    fn on_loss(&mut self, loss: &LossInfo) {
        self.loss_events_in_round += 1;
        self.round_lost_bytes += loss.lost_bytes;
        if !self.loss_in_round {
            self.loss_in_round = true;
        }
        if loss.new_event {
            self.save_cwnd();
            self.in_recovery = true;
            self.cwnd = (loss.in_flight + self.mss).max(self.min_pipe_cwnd());
            self.packet_conservation = true;
            self.conservation_round = self.round_count;
        } else {
            self.newly_lost += loss.lost_bytes;
        }
        if loss.kind == LossKind::Rto || !self.bw_probe_samples {
            return;
        }
        let rs = RateSample {
            tx_in_flight: loss.tx_in_flight,
            lost: loss.lost_total - loss.lost_at_send,
            is_app_limited: loss.is_app_limited,
            ..Default::default()
        };
        if is_inflight_too_high(&rs, self.t.loss_thresh) {
            let rs = RateSample {
                tx_in_flight: inflight_hi_from_lost_packet(
                    rs.tx_in_flight,
                    rs.lost,
                    self.mss,
                    self.t.loss_thresh,
                ),
                ..rs
            };
            self.handle_inflight_too_high(loss.now, &rs, loss.delivered);
        }
    }

    fn on_recovery_exit(&mut self, _now: SimTime) {
        self.in_recovery = false;
        self.packet_conservation = false;
        self.restore_cwnd();
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
        Some(self.mode.name().to_string())
    }

    fn btl_bw(&self) -> Option<f64> {
        Some(self.max_bw())
    }

    fn min_rtt(&self) -> Option<Duration> {
        self.min_rtt.get()
    }

    fn wants_app_limited(&self) -> bool {
        self.app_limited_request
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MSS: u64 = 1448;

    struct Driver {
        now: SimTime,
        delivered: u64,
    }

    impl Driver {
        fn ack(&mut self, b: &mut Bbr, rs: RateSample, in_flight: u64) {
            self.now += Duration::from_micros(1200);
            self.delivered += MSS;
            b.on_ack(&AckInfo {
                now: self.now,
                rs: RateSample {
                    newly_acked: MSS,
                    prior_delivered: self.delivered.saturating_sub(10 * MSS),
                    delivered: 10 * MSS,
                    ..rs
                },
                delivered: self.delivered,
                prior_in_flight: in_flight,
                in_flight,
                in_recovery: false,
                srtt: rs.rtt,
            });
        }

        fn steady(&mut self, b: &mut Bbr, in_flight: u64) {
            self.ack(
                b,
                RateSample {
                    delivery_rate: Some(9.65e6),
                    rtt: Some(Duration::from_millis(12)),
                    tx_in_flight: in_flight,
                    ..Default::default()
                },
                in_flight,
            );
        }
    }

    fn drive_to_up(b: &mut Bbr, d: &mut Driver) {
        for _ in 0..20_000 {
            // Report in-flight above the UP exit threshold only once in UP,
            // so DOWN can settle into CRUISE first.
            let in_flight = if b.mode() == BbrMode::Up { 12 * MSS } else { 8 * MSS };
            d.steady(b, in_flight);
            if b.mode() == BbrMode::Up && b.bw_probe_samples {
                return;
            }
        }
        panic!("never reached ProbeBW:UP (mode {:?})", b.mode());
    }

    fn v3() -> Bbr {
        Bbr::new(BbrVersion::V3, MSS, 10, RngStream::new(3, "bbr3-test"))
    }

    #[test]
    fn startup_to_probe_bw() {
        let mut b = v3();
        let mut d = Driver { now: SimTime::ZERO, delivered: 0 };
        assert_eq!(b.mode(), BbrMode::Startup);
        for _ in 0..2000 {
            d.steady(&mut b, 8 * MSS);
        }
        assert!(b.mode().is_probe_bw(), "mode {:?}", b.mode());
        assert!((b.btl_bw().unwrap() - 9.65e6).abs() < 1.0);
    }

    #[test]
    fn excessive_loss_clamps_inflight_hi_during_probe() {
        let mut b = v3();
        let mut d = Driver { now: SimTime::ZERO, delivered: 0 };
        drive_to_up(&mut b, &mut d);
        assert_eq!(b.inflight_hi(), None);
        let tx = 40 * MSS;
        // 5% of what was in flight.
        d.ack(
            &mut b,
            RateSample {
                delivery_rate: Some(9.65e6),
                rtt: Some(Duration::from_millis(12)),
                tx_in_flight: tx,
                lost: 2 * MSS,
                ..Default::default()
            },
            12 * MSS,
        );
        assert_eq!(b.inflight_hi(), Some(tx));
        assert_eq!(b.mode(), BbrMode::Down);
    }

    #[test]
    fn loss_below_threshold_leaves_inflight_hi_alone() {
        let mut b = v3();
        let mut d = Driver { now: SimTime::ZERO, delivered: 0 };
        drive_to_up(&mut b, &mut d);
        // 1% of what was in flight.
        d.ack(
            &mut b,
            RateSample {
                delivery_rate: Some(9.65e6),
                rtt: Some(Duration::from_millis(12)),
                tx_in_flight: 100 * MSS,
                lost: MSS,
                ..Default::default()
            },
            12 * MSS,
        );
        assert_eq!(b.inflight_hi(), None);
        assert_eq!(b.mode(), BbrMode::Up);
    }

    #[test]
    fn cruise_paces_at_estimated_bandwidth() {
        let mut b = v3();
        let mut d = Driver { now: SimTime::ZERO, delivered: 0 };
        for _ in 0..20_000 {
            d.steady(&mut b, 8 * MSS);
            if b.mode() == BbrMode::Cruise {
                break;
            }
        }
        assert_eq!(b.mode(), BbrMode::Cruise);
        let rate = b.pacing_rate().unwrap();
        assert!((rate / 9.65e6 - 1.0).abs() < 0.02, "{rate}");
    }

    #[test]
    fn probe_rtt_recurs_and_keeps_floor() {
        let mut b = v3();
        let mut d = Driver { now: SimTime::ZERO, delivered: 0 };
        let mut entries = Vec::new();
        let mut prev = b.mode();
        while d.now < SimTime::from_secs(30) {
            let inflight = if b.mode() == BbrMode::ProbeRtt { 4 * MSS } else { 8 * MSS };
            d.steady(&mut b, inflight);
            assert!(b.cwnd() >= 4 * MSS);
            if b.mode() == BbrMode::ProbeRtt && prev != BbrMode::ProbeRtt {
                entries.push(d.now);
            }
            prev = b.mode();
        }
        assert!(entries.len() >= 4, "{entries:?}");
        for w in entries.windows(2) {
            assert!(w[1] - w[0] <= Duration::from_millis(5500));
        }
    }

    #[test]
    fn lost_packet_estimate_lands_on_threshold() {
        // 100 packets in flight, 3 lost: 2% crossing at ~ 99 + (0.02*99 - 2)/0.98
        let est = inflight_hi_from_lost_packet(100, 3, 1, 0.02);
        assert!((98..=99).contains(&est), "{est}");
    }
}
