//! Monte Carlo summaries and the seed-splitting rule.
//!
//! Every random stream in the crate is derived from a base seed: replicate
//! `k` of an experiment seeds a ChaCha8 generator with `base + k` and selects
//! the ChaCha stream of the consuming subsystem. Replicates therefore never
//! share a stream and the whole battery is reproducible from one integer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Independent stream identifiers, one per consumer of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Spde = 1,
    Dual = 2,
    OnOffPath = 3,
    Brownian = 4,
}

/// Seed of replicate `index` under base seed `base`.
pub fn replicate_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

pub fn replicate_rng(base: u64, index: u64, stream: Stream) -> ChaCha8Rng {
    stream_rng(replicate_seed(base, index), stream)
}

/// Mean, standard error and sample count of a Monte Carlo quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl McEstimate {
    /// Summarises `samples` in the given order, so the result is bit-identical
    /// for identical inputs regardless of how they were produced.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::Precondition(format!(
                "a Monte Carlo estimate needs at least 2 samples, got {n}"
            )));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let ss: f64 = samples.iter().map(|s| (s - mean) * (s - mean)).sum();
        let var = ss / (n - 1) as f64;
        Ok(Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            n,
        })
    }

    pub fn combined_stderr(&self, other: &McEstimate) -> f64 {
        self.stderr.hypot(other.stderr)
    }
}

/// Wilson score interval for a binomial proportion at normal quantile `z`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn estimate_of_constant_has_zero_stderr() {
        let e = McEstimate::from_samples(&[0.25; 10]).unwrap();
        assert_eq!(e.mean, 0.25);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.n, 10);
    }

    #[test]
    fn estimate_needs_two_samples() {
        assert!(McEstimate::from_samples(&[1.0]).is_err());
    }

    #[test]
    fn stderr_matches_hand_computation() {
        // samples 1,2,3,4: mean 2.5, sample variance 5/3
        let e = McEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((e.mean - 2.5).abs() < 1e-15);
        assert!((e.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn wilson_brackets_the_proportion() {
        let (lo, hi) = wilson_interval(30, 100, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        let (lo, hi) = wilson_interval(0, 200, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.03);
    }

    #[test]
    fn replicate_streams_differ_and_repeat() {
        let a: u64 = replicate_rng(7, 0, Stream::Spde).random();
        let b: u64 = replicate_rng(7, 1, Stream::Spde).random();
        let c: u64 = replicate_rng(7, 0, Stream::Dual).random();
        let a2: u64 = replicate_rng(7, 0, Stream::Spde).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, a2);
    }
}
