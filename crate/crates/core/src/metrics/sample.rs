use std::collections::VecDeque;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cca::CcaKind;
use crate::packet::{FlowId, MSS};
use crate::time::SimTime;
use crate::transport::Sender;

/// One periodic observation of one flow. Optional fields are omitted from
/// the log when absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    /// Seconds since run start.
    pub t: f64,
    pub flow_id: FlowId,
    pub cca: CcaKind,
    /// Distinct payload bits/s reported delivered over the trailing window.
    pub goodput: f64,
    /// Smoothed RTT in ms, once measured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub srtt: Option<f64>,
    /// Mean absolute difference of consecutive RTT samples in the window, ms.
    pub jitter: f64,
    /// Congestion window in MSS-sized packets.
    pub cwnd: f64,
    /// Bytes in flight.
    pub inflight: u64,
    pub retransmissions: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pacing_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pacing_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbr_state: Option<String>,
    /// Packets queued at the bottleneck in the data direction.
    pub qdisc_backlog: u64,
    /// Bottleneck bandwidth estimate in bits/s (BBR flows).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub btl_bw: Option<f64>,
}

/// Per-flow sampling state: the acked-bytes history for goodput and the
/// RTT samples inside the window for jitter.
#[derive(Debug)]
pub struct FlowProbe {
    started_at: SimTime,
    window: Duration,
    acked_history: VecDeque<(SimTime, u64)>,
    rtts: VecDeque<(SimTime, Duration)>,
}

impl FlowProbe {
    pub fn new(started_at: SimTime, window: Duration) -> Self {
        FlowProbe {
            started_at,
            window,
            acked_history: VecDeque::new(),
            rtts: VecDeque::new(),
        }
    }

    /// Goodput in bits/s over `(now - window, now]`, or over the time since
    /// the flow started if that is shorter.
    fn goodput(&mut self, now: SimTime, acked: u64) -> f64 {
        let window_start = if now.saturating_since(self.started_at) < self.window {
            self.started_at
        } else {
            SimTime::from_nanos(now.as_nanos() - self.window.as_nanos() as u64)
        };
        while self.acked_history.len() > 1 && self.acked_history[1].0 <= window_start {
            self.acked_history.pop_front();
        }
        let base = match self.acked_history.front() {
            Some(&(t, bytes)) if t <= window_start => bytes,
            _ => 0,
        };
        self.acked_history.push_back((now, acked));
        let span = now.saturating_since(window_start).as_secs_f64();
        if span <= 0.0 {
            0.0
        } else {
            (acked - base) as f64 * 8.0 / span
        }
    }

    fn jitter(&mut self, now: SimTime) -> f64 {
        let cutoff = now.as_nanos().saturating_sub(self.window.as_nanos() as u64);
        while self.rtts.front().is_some_and(|(t, _)| t.as_nanos() <= cutoff) {
            self.rtts.pop_front();
        }
        jitter_ms(self.rtts.iter().map(|(_, r)| *r))
    }

    pub fn sample(&mut self, sender: &mut Sender, now: SimTime, qdisc_backlog: u64) -> MetricSample {
        self.rtts.extend(sender.drain_rtt_samples());
        let goodput = self.goodput(now, sender.delivered_bytes());
        let jitter = self.jitter(now);
        let cca = sender.cca();
        let state = sender.state();
        MetricSample {
            t: now.as_secs_f64(),
            flow_id: sender.flow_id(),
            cca: cca.kind(),
            goodput,
            srtt: state.srtt.map(|d| d.as_secs_f64() * 1e3),
            jitter,
            cwnd: state.cwnd as f64 / f64::from(MSS),
            inflight: state.inflight,
            retransmissions: state.retransmissions,
            pacing_rate: cca.pacing_rate(),
            pacing_gain: cca.pacing_gain(),
            bbr_state: if cca.kind().is_bbr() { cca.state_name() } else { None },
            qdisc_backlog,
            btl_bw: cca.btl_bw(),
        }
    }
}

/// Mean absolute difference between consecutive RTTs, in ms; zero with
/// fewer than two samples.
pub fn jitter_ms(rtts: impl IntoIterator<Item = Duration>) -> f64 {
    let mut prev: Option<Duration> = None;
    let mut sum = 0.0;
    let mut n = 0u64;
    for r in rtts {
        if let Some(p) = prev {
            sum += (r.as_secs_f64() - p.as_secs_f64()).abs();
            n += 1;
        }
        prev = Some(r);
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64 * 1e3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn goodput_over_partial_and_full_windows() {
        let mut p = FlowProbe::new(SimTime::ZERO, Duration::from_secs(1));
        // 125 000 B in the first 100 ms -> 10 Mbps.
        let g = p.goodput(SimTime::from_millis(100), 125_000);
        assert!((g - 10e6).abs() < 1e-6);
        for k in 2..=20u64 {
            p.goodput(SimTime::from_millis(100 * k), 125_000 * k);
        }
        let g = p.goodput(SimTime::from_millis(2100), 125_000 * 21);
        assert!((g - 10e6).abs() < 1e-6, "{g}");
    }

    #[test]
    fn idle_flow_has_zero_goodput() {
        let mut p = FlowProbe::new(SimTime::ZERO, Duration::from_secs(1));
        for k in 1..30u64 {
            assert_eq!(p.goodput(SimTime::from_millis(100 * k), 0), 0.0);
        }
    }

    #[test]
    fn jitter_definition() {
        let ms = Duration::from_millis;
        assert_eq!(jitter_ms([ms(10); 5]), 0.0);
        assert!((jitter_ms([ms(10), ms(12), ms(11)]) - 1.5).abs() < 1e-9);
        assert_eq!(jitter_ms([ms(10)]), 0.0);
    }
}
