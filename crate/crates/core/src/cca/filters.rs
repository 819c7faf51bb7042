//! Windowed extremum filters used by the BBR family.

use std::collections::VecDeque;
use std::time::Duration;

use crate::time::SimTime;

/// Exact running maximum over the samples whose key lies within
/// `window` of the newest key. Keys are round counts or other monotone
/// counters.
#[derive(Clone, Debug)]
pub struct WindowedMax {
    window: u64,
    /// Strictly decreasing values, increasing keys.
    samples: VecDeque<(u64, f64)>,
}

impl WindowedMax {
    pub fn new(window: u64) -> Self {
        assert!(window > 0);
        WindowedMax {
            window,
            samples: VecDeque::new(),
        }
    }

    pub fn update(&mut self, key: u64, value: f64) {
        while self.samples.back().is_some_and(|&(_, v)| v <= value) {
            self.samples.pop_back();
        }
        self.samples.push_back((key, value));
        self.expire(key);
    }

    /// Drops samples that fell out of the window ending at `key`.
    pub fn expire(&mut self, key: u64) {
        while self
            .samples
            .front()
            .is_some_and(|&(k, _)| key.saturating_sub(k) >= self.window)
        {
            self.samples.pop_front();
        }
    }

    pub fn get(&self) -> f64 {
        self.samples.front().map_or(0.0, |&(_, v)| v)
    }

    pub fn reset(&mut self) {
        self.samples.clear();
    }
}

/// Minimum RTT with expiry: once the recorded minimum is older than
/// `window` the next sample replaces it, whatever its value. The output is
/// never larger than any sample observed since `stamp`.
#[derive(Clone, Debug)]
pub struct MinRttFilter {
    window: Duration,
    value: Option<Duration>,
    stamp: SimTime,
}

impl MinRttFilter {
    pub fn new(window: Duration) -> Self {
        MinRttFilter {
            window,
            value: None,
            stamp: SimTime::ZERO,
        }
    }

    pub fn get(&self) -> Option<Duration> {
        self.value
    }

    pub fn stamp(&self) -> SimTime {
        self.stamp
    }

    pub fn is_expired(&self, now: SimTime) -> bool {
        self.value.is_some() && now > self.stamp + self.window
    }

    /// Returns true when the sample replaced the estimate.
    pub fn update(&mut self, rtt: Duration, now: SimTime) -> bool {
        let replace = match self.value {
            None => true,
            Some(v) => rtt < v || self.is_expired(now),
        };
        if replace {
            self.value = Some(rtt);
            self.stamp = now;
        }
        replace
    }

    pub fn set(&mut self, rtt: Duration, stamp: SimTime) {
        self.value = Some(rtt);
        self.stamp = stamp;
    }

    /// Restarts the window without changing the value.
    pub fn refresh(&mut self, now: SimTime) {
        self.stamp = now;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn max_filter_ages_out_after_window() {
        let mut f = WindowedMax::new(10);
        f.update(0, 100.0);
        for k in 1..10 {
            f.update(k, 50.0);
            assert_eq!(f.get(), 100.0);
        }
        f.update(10, 50.0);
        assert_eq!(f.get(), 50.0);
    }

    #[test]
    fn min_rtt_expires_to_fresh_sample() {
        let mut f = MinRttFilter::new(Duration::from_secs(10));
        f.update(Duration::from_millis(10), SimTime::ZERO);
        assert!(!f.update(Duration::from_millis(20), SimTime::from_secs(5)));
        assert_eq!(f.get(), Some(Duration::from_millis(10)));
        assert!(f.update(Duration::from_millis(20), SimTime::from_secs(11)));
        assert_eq!(f.get(), Some(Duration::from_millis(20)));
    }

    proptest! {
        #[test]
        fn windowed_max_matches_brute_force(
            vals in proptest::collection::vec((0u64..3, 0.0f64..1000.0), 1..300),
            window in 1u64..20,
        ) {
            let mut f = WindowedMax::new(window);
            let mut key = 0u64;
            let mut hist: Vec<(u64, f64)> = Vec::new();
            for (step, v) in vals {
                key += step;
                f.update(key, v);
                hist.push((key, v));
                let oracle = hist
                    .iter()
                    .filter(|(k, _)| key - k < window)
                    .map(|(_, v)| *v)
                    .fold(f64::MIN, f64::max);
                prop_assert_eq!(f.get(), oracle);
            }
        }

        #[test]
        fn min_rtt_never_exceeds_samples_since_stamp(
            samples in proptest::collection::vec((1u64..2000, 1u64..500), 1..300),
        ) {
            let mut f = MinRttFilter::new(Duration::from_secs(10));
            let mut now = SimTime::ZERO;
            let mut hist: Vec<(SimTime, Duration)> = Vec::new();
            for (dt_ms, rtt_ms) in samples {
                now += Duration::from_millis(dt_ms * 10);
                let rtt = Duration::from_millis(rtt_ms);
                f.update(rtt, now);
                hist.push((now, rtt));
                let min = f.get().unwrap();
                for &(t, r) in &hist {
                    if t >= f.stamp() {
                        prop_assert!(min <= r);
                    }
                }
            }
        }
    }
}
