use std::any::Any;

use super::{AckInfo, CcaKind, CongestionControl, LossInfo, LossKind};
use crate::time::SimTime;

pub const CUBIC_C: f64 = 0.4;
pub const CUBIC_BETA: f64 = 0.7;

/// Time in seconds for the curve to climb back to `w_max` after a
/// reduction to `beta * w_max`.
pub fn cubic_k(w_max: f64, beta: f64, c: f64) -> f64 {
    (w_max * (1.0 - beta) / c).cbrt()
}

/// W(t) = C (t - K)^3 + W_max, in segments.
pub fn cubic_window(t_secs: f64, w_max: f64, k: f64, c: f64) -> f64 {
    c * (t_secs - k).powi(3) + w_max
}

/// Parameters of the running congestion-avoidance epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicEpoch {
    pub start: SimTime,
    /// Plateau of the curve in segments.
    pub w_max: f64,
    /// Seconds from `start` to the plateau.
    pub k: f64,
}

impl CubicEpoch {
    pub fn window_at(&self, now: SimTime) -> f64 {
        let t = now.saturating_since(self.start).as_secs_f64();
        cubic_window(t, self.w_max, self.k, CUBIC_C)
    }
}

/// CUBIC without HyStart, the TCP-friendly region or fast convergence.
/// In congestion avoidance the window is exactly W(t).
#[derive(Clone, Debug)]
pub struct Cubic {
    mss: u64,
    /// Bytes, kept fractional so per-ACK growth is not lost to rounding.
    cwnd: f64,
    ssthresh: f64,
    w_max: f64,
    epoch: Option<CubicEpoch>,
}

impl Cubic {
    pub fn new(mss: u64, initial_cwnd_segments: u64) -> Self {
        Cubic {
            mss,
            cwnd: (initial_cwnd_segments * mss) as f64,
            ssthresh: f64::INFINITY,
            w_max: 0.0,
            epoch: None,
        }
    }

    pub fn epoch(&self) -> Option<CubicEpoch> {
        self.epoch
    }

    pub fn ssthresh(&self) -> f64 {
        self.ssthresh
    }

    pub fn cwnd_segments(&self) -> f64 {
        self.cwnd / self.mss as f64
    }

    fn in_slow_start(&self) -> bool {
        self.cwnd < self.ssthresh
    }

    fn start_epoch(&mut self, now: SimTime) {
        let cwnd = self.cwnd_segments();
        let (w_max, k) = if cwnd < self.w_max {
            (self.w_max, ((self.w_max - cwnd) / CUBIC_C).cbrt())
        } else {
            (cwnd, 0.0)
        };
        self.epoch = Some(CubicEpoch { start: now, w_max, k });
    }
}

impl CongestionControl for Cubic {
    fn kind(&self) -> CcaKind {
        CcaKind::Cubic
    }

    fn on_ack(&mut self, ack: &AckInfo) {
        let acked = ack.rs.newly_acked;
        if acked == 0 {
            return;
        }
        if self.in_slow_start() {
            self.cwnd = (self.cwnd + acked as f64).min(self.ssthresh.max(self.cwnd));
            return;
        }
        if self.epoch.is_none() {
            self.start_epoch(ack.now);
        }
        let target = self.epoch.unwrap().window_at(ack.now) * self.mss as f64;
        if target > self.cwnd {
            self.cwnd = target;
        }
    }

    fn on_loss(&mut self, loss: &LossInfo) {
        if !loss.new_event {
            return;
        }
        let mss = self.mss as f64;
        self.w_max = self.cwnd_segments();
        match loss.kind {
            LossKind::Rto => {
                self.ssthresh = (self.cwnd * CUBIC_BETA).max(2.0 * mss);
                self.cwnd = mss;
                self.epoch = None;
            }
            LossKind::Sack => {
                self.cwnd = (self.cwnd * CUBIC_BETA).max(2.0 * mss);
                self.ssthresh = self.cwnd;
                let k = cubic_k(self.w_max, CUBIC_BETA, CUBIC_C);
                self.epoch = Some(CubicEpoch {
                    start: loss.now,
                    w_max: self.w_max,
                    k,
                });
            }
        }
    }

    fn cwnd(&self) -> u64 {
        self.cwnd as u64
    }

    fn pacing_rate(&self) -> Option<f64> {
        None
    }

    fn state_name(&self) -> Option<String> {
        Some(if self.in_slow_start() { "SlowStart" } else { "CongAvoid" }.to_string())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
