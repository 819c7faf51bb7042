//! Congestion control algorithms and the interface the TCP sender drives
//! them through.

mod bbr;
mod bbr1;
mod cubic;
pub mod filters;
pub mod tunables;

use std::any::Any;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::rng::RngStream;
use crate::time::SimTime;

pub use bbr::{Bbr, BbrMode};
pub use bbr1::{Bbr1, Bbr1Mode};
pub use cubic::{cubic_k, cubic_window, Cubic, CubicEpoch};
pub use tunables::{BbrTunables, BbrVersion};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CcaKind {
    Cubic,
    Bbr1,
    Bbr2,
    Bbr3,
}

impl CcaKind {
    pub const ALL: [CcaKind; 4] = [CcaKind::Cubic, CcaKind::Bbr1, CcaKind::Bbr2, CcaKind::Bbr3];

    pub fn as_str(self) -> &'static str {
        match self {
            CcaKind::Cubic => "cubic",
            CcaKind::Bbr1 => "bbr1",
            CcaKind::Bbr2 => "bbr2",
            CcaKind::Bbr3 => "bbr3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cubic" => Some(CcaKind::Cubic),
            "bbr1" | "bbr" => Some(CcaKind::Bbr1),
            "bbr2" => Some(CcaKind::Bbr2),
            "bbr3" => Some(CcaKind::Bbr3),
            _ => None,
        }
    }

    pub fn is_bbr(self) -> bool {
        self != CcaKind::Cubic
    }

    /// Instantiates the algorithm. `rng` feeds randomized probing decisions.
    pub fn build(self, mss: u64, initial_cwnd_segments: u64, rng: RngStream) -> Box<dyn CongestionControl> {
        match self {
            CcaKind::Cubic => Box::new(Cubic::new(mss, initial_cwnd_segments)),
            CcaKind::Bbr1 => Box::new(Bbr1::new(mss, initial_cwnd_segments, rng)),
            CcaKind::Bbr2 => Box::new(Bbr::new(BbrVersion::V2, mss, initial_cwnd_segments, rng)),
            CcaKind::Bbr3 => Box::new(Bbr::new(BbrVersion::V3, mss, initial_cwnd_segments, rng)),
        }
    }
}

impl fmt::Display for CcaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-ACK delivery-rate sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RateSample {
    /// Payload bits/s over the sample interval; `None` when the interval is
    /// too short to trust.
    pub delivery_rate: Option<f64>,
    pub rtt: Option<Duration>,
    pub newly_acked: u64,
    pub is_app_limited: bool,
    /// Bytes delivered over the sample interval.
    pub delivered: u64,
    /// Connection `delivered` when the sampled packet was sent.
    pub prior_delivered: u64,
    pub interval: Duration,
    /// Bytes in flight when the sampled packet was sent.
    pub tx_in_flight: u64,
    /// Bytes marked lost between the sampled packet's send and its ACK.
    pub lost: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct AckInfo {
    pub now: SimTime,
    pub rs: RateSample,
    /// Connection-level delivered bytes after this ACK.
    pub delivered: u64,
    pub prior_in_flight: u64,
    pub in_flight: u64,
    pub in_recovery: bool,
    pub srtt: Option<Duration>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    /// Inferred from the SACK scoreboard (duplicate threshold or
    /// time-based reordering window).
    Sack,
    /// Retransmission timeout.
    Rto,
}

#[derive(Clone, Copy, Debug)]
pub struct LossInfo {
    pub now: SimTime,
    pub kind: LossKind,
    pub lost_bytes: u64,
    /// First loss of a recovery episode.
    pub new_event: bool,
    /// Bytes in flight when the lost packet was sent.
    pub tx_in_flight: u64,
    /// Connection lost-bytes counter when the lost packet was sent.
    pub lost_at_send: u64,
    /// Connection lost-bytes counter including this loss.
    pub lost_total: u64,
    pub in_flight: u64,
    /// Connection-level delivered bytes at detection.
    pub delivered: u64,
    pub is_app_limited: bool,
}

pub trait CongestionControl: Send {
    fn kind(&self) -> CcaKind;

    fn on_send(&mut self, _now: SimTime, _in_flight: u64) {}

    fn on_ack(&mut self, ack: &AckInfo);

    fn on_loss(&mut self, loss: &LossInfo);

    fn on_recovery_exit(&mut self, _now: SimTime) {}

    /// Congestion window in bytes.
    fn cwnd(&self) -> u64;

    /// Pacing rate in bits/s; `None` for unpaced algorithms.
    fn pacing_rate(&self) -> Option<f64>;

    fn pacing_gain(&self) -> Option<f64> {
        None
    }

    fn state_name(&self) -> Option<String> {
        None
    }

    /// Bottleneck bandwidth estimate in bits/s.
    fn btl_bw(&self) -> Option<f64> {
        None
    }

    /// Minimum RTT estimate, where the algorithm keeps one.
    fn min_rtt(&self) -> Option<Duration> {
        None
    }

    /// True when the algorithm wants subsequent rate samples flagged
    /// application-limited (BBR does this during ProbeRTT).
    fn wants_app_limited(&self) -> bool {
        false
    }

    fn as_any(&self) -> &dyn Any;
}
