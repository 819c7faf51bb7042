//! Every BBR constant, tagged by version. Alternate parameter sets can be
//! tried by constructing a table by hand and passing it to
//! [`Bbr::with_tunables`](super::Bbr::with_tunables).

use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BbrVersion {
    V1,
    V2,
    V3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BbrTunables {
    pub version: BbrVersion,

    pub startup_pacing_gain: f64,
    pub startup_cwnd_gain: f64,
    pub drain_pacing_gain: f64,
    /// Steady-state cwnd gain in ProbeBW.
    pub cwnd_gain: f64,
    /// Fraction of the computed rate actually used for pacing.
    pub pacing_margin: f64,
    pub min_cwnd_segments: u64,

    /// Startup exits once bandwidth grew less than this factor ...
    pub full_bw_growth: f64,
    /// ... for this many consecutive rounds.
    pub full_bw_rounds: u32,

    pub min_rtt_window: Duration,
    pub probe_rtt_interval: Duration,
    pub probe_rtt_duration: Duration,
    /// ProbeRTT cwnd as a BDP multiple; zero means a flat
    /// `min_cwnd_segments`.
    pub probe_rtt_cwnd_gain: f64,

    /// v1: the 8-phase ProbeBW gain cycle.
    pub probe_bw_cycle: [f64; 8],
    /// v1: bandwidth filter length in round trips.
    pub bw_filter_rounds: u64,

    /// v2/v3 ProbeBW phase gains.
    pub down_pacing_gain: f64,
    pub cruise_pacing_gain: f64,
    pub refill_pacing_gain: f64,
    pub up_pacing_gain: f64,
    pub up_cwnd_gain: f64,

    /// Per-round loss rate above which the path is considered overfull.
    pub loss_thresh: f64,
    /// Multiplicative decrease applied to the short-term bounds.
    pub beta: f64,
    /// Fraction of inflight_hi left in use while cruising.
    pub headroom: f64,
    /// Loss events in one round that end Startup.
    pub startup_full_loss_count: u32,
    /// Base and random spread of the wait between bandwidth probes.
    pub probe_wait_base: Duration,
    pub probe_wait_rand: Duration,
    /// Upper bound on rounds between probes (Reno coexistence).
    pub probe_max_rounds: u64,
    /// Startup high-loss exit sets inflight_hi from the latest inflight
    /// as well as the BDP.
    pub startup_loss_uses_latest_inflight: bool,
}

impl BbrTunables {
    pub fn for_version(version: BbrVersion) -> Self {
        let high_gain = 2.0 / std::f64::consts::LN_2; // 2.885
        let base = BbrTunables {
            version,
            startup_pacing_gain: high_gain,
            startup_cwnd_gain: high_gain,
            drain_pacing_gain: 1.0 / high_gain,
            cwnd_gain: 2.0,
            pacing_margin: 0.01,
            min_cwnd_segments: 4,
            full_bw_growth: 1.25,
            full_bw_rounds: 3,
            min_rtt_window: Duration::from_secs(10),
            probe_rtt_interval: Duration::from_secs(10),
            probe_rtt_duration: Duration::from_millis(200),
            probe_rtt_cwnd_gain: 0.0,
            probe_bw_cycle: [1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            bw_filter_rounds: 10,
            down_pacing_gain: 0.75,
            cruise_pacing_gain: 1.0,
            refill_pacing_gain: 1.0,
            up_pacing_gain: 1.25,
            up_cwnd_gain: 2.0,
            loss_thresh: 0.02,
            beta: 0.7,
            headroom: 0.85,
            startup_full_loss_count: 8,
            probe_wait_base: Duration::from_secs(2),
            probe_wait_rand: Duration::from_secs(1),
            probe_max_rounds: 63,
            startup_loss_uses_latest_inflight: false,
        };
        match version {
            BbrVersion::V1 => base,
            BbrVersion::V2 => BbrTunables {
                probe_rtt_interval: Duration::from_secs(5),
                probe_rtt_cwnd_gain: 0.5,
                ..base
            },
            BbrVersion::V3 => BbrTunables {
                startup_pacing_gain: 2.77,
                startup_cwnd_gain: 2.0,
                down_pacing_gain: 0.9,
                up_cwnd_gain: 2.25,
                probe_rtt_interval: Duration::from_secs(5),
                probe_rtt_cwnd_gain: 0.5,
                startup_full_loss_count: 6,
                probe_wait_rand: Duration::from_millis(500),
                startup_loss_uses_latest_inflight: true,
                ..base
            },
        }
    }
}
