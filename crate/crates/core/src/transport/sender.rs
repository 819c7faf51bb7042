use std::collections::VecDeque;
use std::time::Duration;

use super::rtt::RttEstimator;
use super::TransportError;
use crate::cca::{AckInfo, CongestionControl, LossInfo, LossKind, RateSample};
use crate::packet::{FlowId, Packet};
use crate::time::{serialization_delay, SimTime};

/// Sacked segments above an unsacked one before it is deemed lost.
const DUP_THRESH: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SenderTimer {
    Rto,
    Pacing,
}

/// Side effects requested by the sender; the caller drains both vectors.
#[derive(Debug, Default)]
pub struct Outbox {
    pub packets: Vec<Packet>,
    pub timers: Vec<(SimTime, SenderTimer)>,
}

impl Outbox {
    pub fn clear(&mut self) {
        self.packets.clear();
        self.timers.clear();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SegState {
    /// Sent and neither delivered nor declared lost.
    InFlight,
    Sacked,
    /// Declared lost, waiting for retransmission.
    Lost,
}

/// Per-segment scoreboard entry, kept until cumulatively acknowledged.
#[derive(Clone, Copy, Debug)]
struct Seg {
    state: SegState,
    sent_at: SimTime,
    delivered: u64,
    delivered_time: SimTime,
    first_sent_time: SimTime,
    tx_in_flight: u64,
    lost_at_send: u64,
    is_app_limited: bool,
    retransmitted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LossState {
    Open,
    /// Fast recovery after SACK-detected loss.
    Recovery,
    /// After a retransmission timeout.
    Loss,
}

/// Snapshot of connection state for sampling and inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub flow_id: FlowId,
    pub snd_una: u64,
    pub snd_nxt: u64,
    pub inflight: u64,
    pub cwnd: u64,
    pub srtt: Option<Duration>,
    pub rttvar: Duration,
    pub min_rtt: Option<Duration>,
    pub rto: Duration,
    pub sacked_out: u64,
    pub lost_out: u64,
    pub dupack_count: u32,
    pub retransmissions: u64,
    pub delivered: u64,
    pub delivered_time: SimTime,
    pub app_limited: bool,
}

/// Bulk TCP sender: always has data. Loss recovery uses a SACK scoreboard
/// with a duplicate threshold plus a time-based reordering window, falling
/// back to a retransmission timeout. Provides delivery-rate samples and
/// optional pacing.
pub struct Sender {
    flow_id: FlowId,
    mss: u64,
    cca: Box<dyn CongestionControl>,
    rtt: RttEstimator,

    snd_una: u64,
    snd_nxt: u64,
    /// Entries for `[snd_una, snd_nxt)`, one per MSS.
    segs: VecDeque<Seg>,
    sacked_out: u64,
    lost_out: u64,

    dupacks: u32,
    loss_state: LossState,
    recover: u64,
    /// Send time and RTT of the most recently sent delivered segment.
    rack: Option<(SimTime, Duration)>,

    delivered: u64,
    delivered_time: SimTime,
    first_sent_time: SimTime,
    lost: u64,
    app_limited_until: u64,

    retransmissions: u64,
    segments_sent: u64,

    rto_deadline: Option<SimTime>,
    rto_armed_at: Option<SimTime>,
    next_send_time: SimTime,
    pacing_armed_at: Option<SimTime>,

    /// RTT samples not yet collected by the sampler.
    rtt_log: Vec<(SimTime, Duration)>,
    /// When set, every departure is recorded with the pacing rate in force.
    send_log: Option<Vec<(SimTime, u64, Option<f64>)>>,
}

impl std::fmt::Debug for Sender {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sender")
            .field("flow_id", &self.flow_id)
            .field("cca", &self.cca.kind())
            .field("snd_una", &self.snd_una)
            .field("snd_nxt", &self.snd_nxt)
            .finish_non_exhaustive()
    }
}

impl Sender {
    pub fn new(flow_id: FlowId, mss: u64, cca: Box<dyn CongestionControl>) -> Self {
        Sender {
            flow_id,
            mss,
            cca,
            rtt: RttEstimator::new(),
            snd_una: 0,
            snd_nxt: 0,
            segs: VecDeque::new(),
            sacked_out: 0,
            lost_out: 0,
            dupacks: 0,
            loss_state: LossState::Open,
            recover: 0,
            rack: None,
            delivered: 0,
            delivered_time: SimTime::ZERO,
            first_sent_time: SimTime::ZERO,
            lost: 0,
            app_limited_until: 0,
            retransmissions: 0,
            segments_sent: 0,
            rto_deadline: None,
            rto_armed_at: None,
            next_send_time: SimTime::ZERO,
            pacing_armed_at: None,
            rtt_log: Vec::new(),
            send_log: None,
        }
    }

    pub fn flow_id(&self) -> FlowId {
        self.flow_id
    }

    pub fn cca(&self) -> &dyn CongestionControl {
        self.cca.as_ref()
    }

    pub fn rtt(&self) -> &RttEstimator {
        &self.rtt
    }

    /// Payload bytes cumulatively acknowledged.
    pub fn acked_bytes(&self) -> u64 {
        self.snd_una
    }

    /// Distinct payload bytes known to have reached the receiver, whether
    /// cumulatively or selectively acknowledged.
    pub fn delivered_bytes(&self) -> u64 {
        self.delivered
    }

    pub fn retransmissions(&self) -> u64 {
        self.retransmissions
    }

    pub fn segments_sent(&self) -> u64 {
        self.segments_sent
    }

    pub fn record_sends(&mut self) {
        self.send_log = Some(Vec::new());
    }

    /// Departure times, sequence numbers and pacing rates, if recording.
    pub fn send_log(&self) -> Option<&[(SimTime, u64, Option<f64>)]> {
        self.send_log.as_deref()
    }

    pub fn drain_rtt_samples(&mut self) -> std::vec::Drain<'_, (SimTime, Duration)> {
        self.rtt_log.drain(..)
    }

    /// Bytes believed to be in the network.
    pub fn inflight(&self) -> u64 {
        (self.segs.len() as u64 - self.sacked_out - self.lost_out) * self.mss
    }

    pub fn state(&self) -> FlowState {
        FlowState {
            flow_id: self.flow_id,
            snd_una: self.snd_una,
            snd_nxt: self.snd_nxt,
            inflight: self.inflight(),
            cwnd: self.cca.cwnd(),
            srtt: self.rtt.srtt(),
            rttvar: self.rtt.rttvar(),
            min_rtt: self.rtt.min_rtt(),
            rto: self.rtt.rto(),
            sacked_out: self.sacked_out,
            lost_out: self.lost_out,
            dupack_count: self.dupacks,
            retransmissions: self.retransmissions,
            delivered: self.delivered,
            delivered_time: self.delivered_time,
            app_limited: self.app_limited_until != 0,
        }
    }

    pub fn start(&mut self, now: SimTime, out: &mut Outbox) {
        self.next_send_time = now;
        self.delivered_time = now;
        self.first_sent_time = now;
        self.try_send(now, out);
    }

    pub fn on_timer(&mut self, timer: SenderTimer, at: SimTime, out: &mut Outbox) {
        match timer {
            SenderTimer::Rto => {
                if self.rto_armed_at != Some(at) {
                    return;
                }
                self.rto_armed_at = None;
                match self.rto_deadline {
                    Some(d) if at >= d => self.on_rto(at, out),
                    Some(_) => self.arm_rto(out),
                    None => {}
                }
            }
            SenderTimer::Pacing => {
                if self.pacing_armed_at != Some(at) {
                    return;
                }
                self.pacing_armed_at = None;
                self.try_send(at, out);
            }
        }
    }

    pub fn on_ack(&mut self, pkt: &Packet, now: SimTime, out: &mut Outbox) -> Result<(), TransportError> {
        let ack = pkt.ack_no;
        if ack > self.snd_nxt {
            return Err(TransportError::AckBeyondSent {
                flow_id: self.flow_id,
                ack_no: ack,
                snd_max: self.snd_nxt,
            });
        }
        if ack < self.snd_una {
            // Reordered behind a newer ACK.
            return Ok(());
        }
        let prior_in_flight = self.inflight();
        let prior_delivered = self.delivered;
        let advanced = ack > self.snd_una;
        if !advanced && self.snd_nxt > self.snd_una {
            self.dupacks += 1;
        }

        // The most recently sent newly delivered segment drives the rate
        // sample, the RTT sample (unless retransmitted) and the reordering
        // clock.
        let mut newest: Option<Seg> = None;
        let mut note = |s: &Seg| {
            if newest.is_none_or(|n| (s.sent_at, s.delivered) > (n.sent_at, n.delivered)) {
                newest = Some(*s);
            }
        };

        while self.snd_una < ack {
            let s = self.segs.pop_front().expect("scoreboard covers snd_una..snd_nxt");
            self.snd_una += self.mss;
            match s.state {
                SegState::Sacked => self.sacked_out -= 1,
                SegState::Lost => {
                    self.lost_out -= 1;
                    self.delivered += self.mss;
                    note(&s);
                }
                SegState::InFlight => {
                    self.delivered += self.mss;
                    note(&s);
                }
            }
        }
        for &(start, end) in &pkt.sack {
            let start = start.max(self.snd_una);
            let end = end.min(self.snd_nxt);
            if start >= end {
                continue;
            }
            let first = (start - self.snd_una).div_ceil(self.mss) as usize;
            let last = ((end - self.snd_una) / self.mss) as usize;
            for s in self.segs.range_mut(first..last) {
                match s.state {
                    SegState::Sacked => continue,
                    SegState::Lost => self.lost_out -= 1,
                    SegState::InFlight => {}
                }
                s.state = SegState::Sacked;
                self.sacked_out += 1;
                self.delivered += self.mss;
                note(s);
            }
        }
        let newly_delivered = self.delivered - prior_delivered;
        if newly_delivered > 0 {
            self.delivered_time = now;
        }
        if self.app_limited_until != 0 && self.delivered > self.app_limited_until {
            self.app_limited_until = 0;
        }

        let rtt_sample = newest.filter(|s| !s.retransmitted).map(|s| now - s.sent_at);
        if let Some(rtt) = rtt_sample {
            self.rtt.on_sample(rtt);
            self.rtt_log.push((now, rtt));
        }
        if let Some(s) = newest {
            let rtt = now - s.sent_at;
            // A retransmitted segment acked faster than the path minimum was
            // delivered by its original copy; it says nothing about order.
            let ambiguous = s.retransmitted && self.rtt.min_rtt().is_some_and(|m| rtt < m);
            if !ambiguous && self.rack.is_none_or(|(t, _)| s.sent_at >= t) {
                self.rack = Some((s.sent_at, rtt));
            }
        }
        if advanced {
            self.rtt.reset_backoff();
            self.dupacks = 0;
        }

        let rs = self.rate_sample(newest, now, newly_delivered, rtt_sample);
        self.detect_losses(now);

        if self.loss_state != LossState::Open && self.snd_una >= self.recover {
            self.loss_state = LossState::Open;
            self.cca.on_recovery_exit(now);
        }

        let info = AckInfo {
            now,
            rs,
            delivered: self.delivered,
            prior_in_flight,
            in_flight: self.inflight(),
            in_recovery: self.loss_state != LossState::Open,
            srtt: self.rtt.srtt(),
        };
        if newly_delivered > 0 {
            self.cca.on_ack(&info);
        }
        if self.cca.wants_app_limited() && self.app_limited_until == 0 {
            self.app_limited_until = (self.delivered + self.inflight()).max(1);
        }

        if advanced {
            self.rto_deadline = (self.snd_nxt > self.snd_una).then(|| now + self.rtt.rto());
            self.arm_rto(out);
        }
        self.try_send(now, out);
        Ok(())
    }

    /// Marks in-flight segments lost when enough later data was sacked or
    /// when a later-sent segment was delivered more than a reordering
    /// window ago relative to their own send time.
    fn detect_losses(&mut self, now: SimTime) {
        if self.sacked_out == 0 {
            return;
        }
        let reo_wnd = self.rtt.min_rtt().map_or(Duration::ZERO, |m| m / 4);
        let mut sacked_above = self.sacked_out;
        for i in 0..self.segs.len() {
            if sacked_above == 0 {
                break;
            }
            let s = self.segs[i];
            match s.state {
                SegState::Sacked => {
                    sacked_above -= 1;
                    continue;
                }
                SegState::Lost => continue,
                SegState::InFlight => {}
            }
            let by_count = !s.retransmitted && sacked_above >= DUP_THRESH;
            let by_time = self
                .rack
                .is_some_and(|(xmit, rtt)| s.sent_at < xmit && now >= s.sent_at + rtt + reo_wnd);
            if by_count || by_time {
                self.mark_lost(i, now);
            }
        }
    }

    fn mark_lost(&mut self, idx: usize, now: SimTime) {
        let s = &mut self.segs[idx];
        s.state = SegState::Lost;
        let seg = *s;
        self.lost_out += 1;
        self.lost += self.mss;
        let new_event = self.loss_state == LossState::Open;
        if new_event {
            self.loss_state = LossState::Recovery;
            self.recover = self.snd_nxt;
        }
        self.cca.on_loss(&LossInfo {
            now,
            kind: LossKind::Sack,
            lost_bytes: self.mss,
            new_event,
            tx_in_flight: seg.tx_in_flight,
            lost_at_send: seg.lost_at_send,
            lost_total: self.lost,
            in_flight: self.inflight(),
            delivered: self.delivered,
            is_app_limited: seg.is_app_limited,
        });
    }

    fn rate_sample(
        &mut self,
        p: Option<Seg>,
        now: SimTime,
        newly_acked: u64,
        rtt: Option<Duration>,
    ) -> RateSample {
        let mut rs = RateSample {
            rtt,
            newly_acked,
            ..Default::default()
        };
        let Some(p) = p else { return rs };
        self.first_sent_time = p.sent_at;
        rs.prior_delivered = p.delivered;
        rs.delivered = self.delivered - p.delivered;
        rs.is_app_limited = p.is_app_limited;
        rs.tx_in_flight = p.tx_in_flight;
        rs.lost = self.lost - p.lost_at_send;
        let send_elapsed = p.sent_at - p.first_sent_time;
        let ack_elapsed = now - p.delivered_time;
        rs.interval = send_elapsed.max(ack_elapsed);
        // Intervals shorter than the path minimum come from ACK compression
        // and would overstate the rate.
        let too_short = self.rtt.min_rtt().is_some_and(|m| rs.interval < m);
        if !rs.interval.is_zero() && !too_short {
            rs.delivery_rate = Some(rs.delivered as f64 * 8.0 / rs.interval.as_secs_f64());
        }
        rs
    }

    fn on_rto(&mut self, now: SimTime, out: &mut Outbox) {
        if self.snd_nxt == self.snd_una {
            self.rto_deadline = None;
            return;
        }
        let lost_before = self.lost;
        for s in self.segs.iter_mut().filter(|s| s.state == SegState::InFlight) {
            s.state = SegState::Lost;
            self.lost_out += 1;
            self.lost += self.mss;
        }
        let head = self.segs.front().copied();
        let new_event = self.loss_state != LossState::Loss;
        self.rtt.back_off();
        self.loss_state = LossState::Loss;
        self.recover = self.snd_nxt;
        self.dupacks = 0;
        self.rack = None;
        self.cca.on_loss(&LossInfo {
            now,
            kind: LossKind::Rto,
            lost_bytes: self.lost - lost_before,
            new_event,
            tx_in_flight: head.map_or(0, |s| s.tx_in_flight),
            lost_at_send: head.map_or(0, |s| s.lost_at_send),
            lost_total: self.lost,
            in_flight: self.inflight(),
            delivered: self.delivered,
            is_app_limited: head.is_some_and(|s| s.is_app_limited),
        });
        self.next_send_time = now;
        self.rto_deadline = Some(now + self.rtt.rto());
        self.arm_rto(out);
        self.try_send(now, out);
    }

    fn arm_rto(&mut self, out: &mut Outbox) {
        let Some(d) = self.rto_deadline else { return };
        if self.rto_armed_at.is_none_or(|a| d < a) {
            self.rto_armed_at = Some(d);
            out.timers.push((d, SenderTimer::Rto));
        }
    }

    fn arm_pacing(&mut self, at: SimTime, out: &mut Outbox) {
        if self.pacing_armed_at.is_none_or(|a| at < a) {
            self.pacing_armed_at = Some(at);
            out.timers.push((at, SenderTimer::Pacing));
        }
    }

    fn try_send(&mut self, now: SimTime, out: &mut Outbox) {
        while self.inflight() + self.mss <= self.cca.cwnd() {
            let rate = self.cca.pacing_rate();
            if rate.is_some() && now < self.next_send_time {
                self.arm_pacing(self.next_send_time, out);
                return;
            }
            let idx = if self.lost_out > 0 {
                self.segs.iter().position(|s| s.state == SegState::Lost)
            } else {
                None
            };
            self.transmit(idx, now, out);
            if let Some(r) = rate {
                let gap = if r > 0.0 {
                    serialization_delay(self.mss as u32, r)
                } else {
                    Duration::from_secs(1)
                };
                self.next_send_time = now + gap;
            }
        }
    }

    /// Sends the lost segment at `idx`, or new data when `None`.
    fn transmit(&mut self, idx: Option<usize>, now: SimTime, out: &mut Outbox) {
        if self.inflight() == 0 {
            self.first_sent_time = now;
            self.delivered_time = now;
        }
        let seg = Seg {
            state: SegState::InFlight,
            sent_at: now,
            delivered: self.delivered,
            delivered_time: self.delivered_time,
            first_sent_time: self.first_sent_time,
            tx_in_flight: self.inflight() + self.mss,
            lost_at_send: self.lost,
            is_app_limited: self.app_limited_until != 0,
            retransmitted: idx.is_some(),
        };
        let seq = match idx {
            Some(i) => {
                debug_assert_eq!(self.segs[i].state, SegState::Lost);
                self.segs[i] = seg;
                self.lost_out -= 1;
                self.retransmissions += 1;
                self.snd_una + i as u64 * self.mss
            }
            None => {
                self.segs.push_back(seg);
                self.snd_nxt += self.mss;
                self.snd_nxt - self.mss
            }
        };
        self.segments_sent += 1;
        if let Some(log) = self.send_log.as_mut() {
            log.push((now, seq, self.cca.pacing_rate()));
        }
        self.cca.on_send(now, self.inflight());
        out.packets.push(Packet::data(self.flow_id, seq, now));
        if self.rto_deadline.is_none() {
            self.rto_deadline = Some(now + self.rtt.rto());
            self.arm_rto(out);
        }
    }
}
