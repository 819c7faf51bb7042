use std::time::Duration;

pub const MIN_RTO: Duration = Duration::from_millis(200);
pub const MAX_RTO: Duration = Duration::from_secs(60);
pub const INITIAL_RTO: Duration = Duration::from_secs(1);

/// Smoothed RTT and retransmission timeout in the usual Jacobson/Karels
/// form: gains 1/8 and 1/4, RTO = srtt + 4 rttvar with a 200 ms floor and
/// exponential backoff.
#[derive(Clone, Debug)]
pub struct RttEstimator {
    srtt: Option<Duration>,
    rttvar: Duration,
    min_rtt: Option<Duration>,
    latest: Option<Duration>,
    backoff: u32,
}

impl Default for RttEstimator {
    fn default() -> Self {
        Self::new()
    }
}

impl RttEstimator {
    pub fn new() -> Self {
        RttEstimator {
            srtt: None,
            rttvar: Duration::ZERO,
            min_rtt: None,
            latest: None,
            backoff: 0,
        }
    }

    pub fn on_sample(&mut self, rtt: Duration) {
        self.latest = Some(rtt);
        self.min_rtt = Some(self.min_rtt.map_or(rtt, |m| m.min(rtt)));
        match self.srtt {
            None => {
                self.srtt = Some(rtt);
                self.rttvar = rtt / 2;
            }
            Some(srtt) => {
                let err = if srtt > rtt { srtt - rtt } else { rtt - srtt };
                self.rttvar = (self.rttvar * 3 + err) / 4;
                self.srtt = Some((srtt * 7 + rtt) / 8);
            }
        }
    }

    pub fn srtt(&self) -> Option<Duration> {
        self.srtt
    }

    pub fn rttvar(&self) -> Duration {
        self.rttvar
    }

    pub fn min_rtt(&self) -> Option<Duration> {
        self.min_rtt
    }

    pub fn latest(&self) -> Option<Duration> {
        self.latest
    }

    /// Timeout before backoff.
    pub fn base_rto(&self) -> Duration {
        match self.srtt {
            None => INITIAL_RTO,
            Some(srtt) => (srtt + self.rttvar * 4).clamp(MIN_RTO, MAX_RTO),
        }
    }

    pub fn rto(&self) -> Duration {
        let factor = 1u32 << self.backoff.min(16);
        (self.base_rto() * factor).min(MAX_RTO)
    }

    pub fn back_off(&mut self) {
        self.backoff = (self.backoff + 1).min(16);
    }

    pub fn reset_backoff(&mut self) {
        self.backoff = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_sample_initialises_srtt() {
        let mut r = RttEstimator::new();
        r.on_sample(Duration::from_millis(10));
        assert_eq!(r.srtt(), Some(Duration::from_millis(10)));
        assert_eq!(r.rttvar(), Duration::from_millis(5));
    }

    #[test]
    fn ewma_gains() {
        let mut r = RttEstimator::new();
        r.on_sample(Duration::from_millis(10));
        r.on_sample(Duration::from_millis(18));
        // rttvar = 3/4 * 5 + 1/4 * 8 = 5.75; srtt = 7/8 * 10 + 1/8 * 18 = 11
        assert_eq!(r.rttvar(), Duration::from_micros(5750));
        assert_eq!(r.srtt(), Some(Duration::from_millis(11)));
    }

    #[test]
    fn rto_floor_and_backoff() {
        let mut r = RttEstimator::new();
        assert_eq!(r.rto(), INITIAL_RTO);
        r.on_sample(Duration::from_millis(10));
        assert_eq!(r.rto(), MIN_RTO);
        r.back_off();
        assert_eq!(r.rto(), MIN_RTO * 2);
        for _ in 0..20 {
            r.back_off();
        }
        assert_eq!(r.rto(), MAX_RTO);
        r.reset_backoff();
        assert_eq!(r.rto(), MIN_RTO);
    }
}
