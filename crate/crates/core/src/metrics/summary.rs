use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::fairness::{coefficient_of_variation, convergence_time, jain_index, mean, median};
use super::MetricSample;
use crate::cca::CcaKind;
use crate::packet::FlowId;
use crate::scenario::ScenarioConfig;

/// Analysis window starts at this fraction of the run (30 s of 120 s).
pub const DEFAULT_WINDOW_START_FRACTION: f64 = 0.25;
/// Absolute tolerance around the fair share 1/n.
pub const DEFAULT_CONVERGENCE_BAND: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryOptions {
    pub window_start_fraction: f64,
    pub convergence_band: f64,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions {
            window_start_fraction: DEFAULT_WINDOW_START_FRACTION,
            convergence_band: DEFAULT_CONVERGENCE_BAND,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub flow_id: FlowId,
    pub cca: CcaKind,
    /// bits/s over the analysis window.
    pub mean_goodput: f64,
    pub median_goodput: f64,
    pub goodput_cov: f64,
    /// Fraction of the aggregate mean goodput.
    pub share: f64,
    pub retransmissions: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub duration: f64,
    pub window_start: f64,
    pub window_end: f64,
    pub samples: usize,
    pub flows: Vec<FlowSummary>,
    pub jain_index: f64,
    /// Every flow had zero goodput in the window.
    pub jain_all_zero: bool,
    /// Seconds; absent when shares never settled inside the band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence_time: Option<f64>,
    pub convergence_band: f64,
    /// Largest sum of per-flow goodput at any sampling instant, bits/s.
    pub peak_aggregate_goodput: f64,
}

/// Goodput per flow on a common time grid; instants where a flow has no
/// sample count as zero.
pub struct AlignedSeries {
    pub times: Vec<f64>,
    pub flows: Vec<(FlowId, CcaKind)>,
    pub goodput: Vec<Vec<f64>>,
}

pub fn align(samples: &[MetricSample]) -> AlignedSeries {
    let key = |t: f64| (t * 1e6).round() as i64;
    let mut grid: BTreeMap<i64, f64> = BTreeMap::new();
    let mut flows: BTreeMap<FlowId, CcaKind> = BTreeMap::new();
    for s in samples {
        grid.entry(key(s.t)).or_insert(s.t);
        flows.entry(s.flow_id).or_insert(s.cca);
    }
    let index: BTreeMap<i64, usize> = grid.keys().enumerate().map(|(i, k)| (*k, i)).collect();
    let fidx: BTreeMap<FlowId, usize> = flows.keys().enumerate().map(|(i, f)| (*f, i)).collect();
    let mut goodput = vec![vec![0.0; grid.len()]; flows.len()];
    for s in samples {
        goodput[fidx[&s.flow_id]][index[&key(s.t)]] = s.goodput;
    }
    AlignedSeries {
        times: grid.into_values().collect(),
        flows: flows.into_iter().collect(),
        goodput,
    }
}

pub fn summarize_samples(scenario: &ScenarioConfig, samples: &[MetricSample], opts: SummaryOptions) -> RunSummary {
    let series = align(samples);
    let window_start = scenario.duration * opts.window_start_fraction;
    let window_end = series.times.last().copied().unwrap_or(0.0);
    let eps = 1e-9;
    let mut in_window: Vec<usize> = (0..series.times.len())
        .filter(|&k| series.times[k] >= window_start - eps && series.times[k] <= window_end + eps)
        .collect();
    let window_start = if in_window.is_empty() {
        in_window = (0..series.times.len()).collect();
        series.times.first().copied().unwrap_or(0.0)
    } else {
        window_start
    };

    let mut retrans: BTreeMap<FlowId, u64> = BTreeMap::new();
    for s in samples {
        let r = retrans.entry(s.flow_id).or_default();
        *r = (*r).max(s.retransmissions);
    }

    let windowed: Vec<Vec<f64>> = series
        .goodput
        .iter()
        .map(|g| in_window.iter().map(|&k| g[k]).collect())
        .collect();
    let means: Vec<f64> = windowed.iter().map(|w| mean(w)).collect();
    let total: f64 = means.iter().sum();
    let flows = series
        .flows
        .iter()
        .zip(&windowed)
        .zip(&means)
        .map(|((&(flow_id, cca), w), &m)| FlowSummary {
            flow_id,
            cca,
            mean_goodput: m,
            median_goodput: median(w),
            goodput_cov: coefficient_of_variation(w),
            share: if total > 0.0 { m / total } else { 0.0 },
            retransmissions: retrans.get(&flow_id).copied().unwrap_or(0),
        })
        .collect();
    let jain = jain_index(&means);
    let peak = (0..series.times.len())
        .map(|k| series.goodput.iter().map(|g| g[k]).sum::<f64>())
        .fold(0.0, f64::max);

    RunSummary {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        duration: scenario.duration,
        window_start,
        window_end,
        samples: samples.len(),
        flows,
        jain_index: jain.value,
        jain_all_zero: jain.all_zero,
        convergence_time: convergence_time(&series.times, &series.goodput, opts.convergence_band),
        convergence_band: opts.convergence_band,
        peak_aggregate_goodput: peak,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::preset;

    fn s(t: f64, flow_id: FlowId, goodput: f64) -> MetricSample {
        MetricSample {
            t,
            flow_id,
            cca: CcaKind::Cubic,
            goodput,
            srtt: None,
            jitter: 0.0,
            cwnd: 10.0,
            inflight: 0,
            retransmissions: 0,
            pacing_rate: None,
            pacing_gain: None,
            bbr_state: None,
            qdisc_backlog: 0,
            btl_bw: None,
        }
    }

    #[test]
    fn single_flow_is_perfectly_fair() {
        let cfg = preset("bbr3-solo", 1).unwrap();
        let samples: Vec<_> = (1..=1200).map(|k| s(k as f64 / 10.0, 1, 9e6)).collect();
        let sum = summarize_samples(&cfg, &samples, SummaryOptions::default());
        assert_eq!(sum.jain_index, 1.0);
        assert_eq!(sum.window_start, 30.0);
        assert_eq!(sum.flows[0].share, 1.0);
        assert_eq!(sum.convergence_time, None);
    }

    #[test]
    fn window_excludes_warmup() {
        let cfg = preset("fig5a", 1).unwrap();
        let mut samples = Vec::new();
        for k in 1..=1200 {
            let t = k as f64 / 10.0;
            let (a, b) = if t < 30.0 { (9e6, 1e6) } else { (5e6, 5e6) };
            samples.push(s(t, 1, a));
            samples.push(s(t, 2, b));
        }
        let sum = summarize_samples(&cfg, &samples, SummaryOptions::default());
        assert!((sum.jain_index - 1.0).abs() < 1e-12);
        assert!((sum.convergence_time.unwrap() - 30.0).abs() < 1e-9);
    }
}
