//! Seeded per-component random streams.
//!
//! Every component draws from its own ChaCha stream, keyed by the run seed
//! and a stable hash of the component label. Adding or removing a component
//! therefore never perturbs the draws seen by the others.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

/// Distribution requested from [`RngStream::next`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Draw {
    /// Uniform on `[0, 1)`.
    Uniform,
    /// Exponential with the given mean.
    Exponential { mean: f64 },
}

/// 64-bit FNV-1a; stable across platforms and releases, unlike `DefaultHasher`.
fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    label: String,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, label: &str) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(label_hash(label));
        RngStream {
            seed,
            label: label.to_owned(),
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn exponential(&mut self, mean: f64) -> f64 {
        assert!(mean > 0.0, "exponential mean must be positive");
        Exp::new(1.0 / mean)
            .expect("positive rate")
            .sample(&mut self.rng)
    }

    /// Uniform integer in `lo..hi`.
    pub fn range_u64(&mut self, lo: u64, hi: u64) -> u64 {
        self.rng.random_range(lo..hi)
    }

    pub fn next(&mut self, draw: Draw) -> f64 {
        match draw {
            Draw::Uniform => self.uniform(),
            Draw::Exponential { mean } => self.exponential(mean),
        }
    }
}

/// Registry of named streams for one run. Drawing from an unregistered label
/// is a contract violation.
#[derive(Debug, Default)]
pub struct RngRegistry {
    seed: u64,
    streams: Vec<RngStream>,
}

impl RngRegistry {
    pub fn new(seed: u64) -> Self {
        RngRegistry {
            seed,
            streams: Vec::new(),
        }
    }

    pub fn register(&mut self, label: &str) -> usize {
        if let Some(i) = self.streams.iter().position(|s| s.label == label) {
            return i;
        }
        self.streams.push(RngStream::new(self.seed, label));
        self.streams.len() - 1
    }

    /// Draws from the stream registered under `label`.
    ///
    /// # Panics
    ///
    /// Panics if `label` was never registered.
    pub fn next_random(&mut self, label: &str, draw: Draw) -> f64 {
        let stream = self
            .streams
            .iter_mut()
            .find(|s| s.label == label)
            .unwrap_or_else(|| panic!("unregistered random stream `{label}`"));
        stream.next(draw)
    }

    pub fn take(&mut self, label: &str) -> RngStream {
        let i = self.register(label);
        self.streams[i].clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_draws_stay_in_unit_interval() {
        let mut s = RngStream::new(7, "netpath/up");
        for _ in 0..100_000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RngStream::new(42, "cca/1");
        let mut b = RngStream::new(42, "cca/1");
        for _ in 0..1000 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn labels_give_independent_streams() {
        let mut a = RngStream::new(42, "cca/1");
        let mut b = RngStream::new(42, "cca/2");
        let same = (0..100)
            .filter(|_| a.uniform().to_bits() == b.uniform().to_bits())
            .count();
        assert_eq!(same, 0);
    }

    #[test]
    fn exponential_sample_mean_converges() {
        // Law of large numbers: the standard error of the mean of 10^6
        // exponential draws is mean/1000, so 1% is a 10-sigma band.
        let mut s = RngStream::new(1, "exp");
        let n = 1_000_000;
        let mean = 0.010;
        let total: f64 = (0..n).map(|_| s.exponential(mean)).sum();
        let got = total / n as f64;
        assert!((got - mean).abs() / mean < 0.01, "sample mean {got}");
    }

    #[test]
    #[should_panic(expected = "unregistered")]
    fn unregistered_stream_is_rejected() {
        let mut r = RngRegistry::new(1);
        r.register("a");
        r.next_random("b", Draw::Uniform);
    }

    #[test]
    fn registry_draws_match_direct_stream() {
        let mut r = RngRegistry::new(9);
        r.register("x");
        let mut s = RngStream::new(9, "x");
        for _ in 0..10 {
            assert_eq!(r.next_random("x", Draw::Uniform), s.uniform());
        }
    }
}
