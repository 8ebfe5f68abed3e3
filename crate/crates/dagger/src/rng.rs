//! Reproducible random streams.
//!
//! Every random draw in the simulation harness comes from a ChaCha12
//! counter-based generator keyed by the experiment seed, with the 64-bit
//! ChaCha stream id encoding (replication, purpose). Streams are therefore
//! independent of scheduling: replication 17's truth assignment is the same
//! whether replications run serially or in parallel, and the same
//! (seed, replication) produces the same data no matter which testing
//! method consumes it.
//!
//! Uniform variates are taken as (k + 1/2) / 2^53 from the top 53 bits of
//! `next_u64`, which lands strictly inside (0, 1) so inverse-CDF transforms
//! never see an endpoint.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

/// What a stream is consumed for; part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Graph = 0,
    Truth = 1,
    PValues = 2,
}

/// Factory for the per-(replication, purpose) generators of one experiment.
#[derive(Debug, Clone, Copy)]
pub struct Streams {
    key: [u8; 32],
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Streams {
    /// Expand a 64-bit experiment seed into the 256-bit ChaCha key.
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Streams { key }
    }

    fn stream(&self, slot: u64, purpose: Purpose) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::from_seed(self.key);
        rng.set_stream((slot << 8) | purpose as u64);
        rng
    }

    /// Experiment-scoped stream (slot 0), e.g. for a graph shared by all
    /// replications.
    pub fn experiment(&self, purpose: Purpose) -> ChaCha12Rng {
        self.stream(0, purpose)
    }

    /// Stream for replication `rep` (0-based; slots start at 1 so they never
    /// collide with the experiment scope).
    pub fn replication(&self, rep: usize, purpose: Purpose) -> ChaCha12Rng {
        self.stream(rep as u64 + 1, purpose)
    }
}

/// Uniform draw strictly inside (0, 1).
pub fn open_unit(rng: &mut impl RngCore) -> f64 {
    const SCALE: f64 = 1.0 / 9_007_199_254_740_992.0; // 2^-53
    ((rng.next_u64() >> 11) as f64 + 0.5) * SCALE
}

/// Uniform index in 0..n by bitmask rejection.
pub fn uniform_index(rng: &mut impl RngCore, n: usize) -> usize {
    debug_assert!(n > 0);
    if n == 1 {
        return 0;
    }
    let mask = (n as u64)
        .checked_next_power_of_two()
        .map_or(u64::MAX, |p| p - 1);
    loop {
        let v = rng.next_u64() & mask;
        if (v as usize) < n {
            return v as usize;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let s = Streams::new(42);
        let a: Vec<u64> = {
            let mut r = s.replication(3, Purpose::Truth);
            (0..5).map(|_| r.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut r = s.replication(3, Purpose::Truth);
            (0..5).map(|_| r.next_u64()).collect()
        };
        assert_eq!(a, b);
        let mut r = s.replication(3, Purpose::PValues);
        assert_ne!(a[0], r.next_u64());
        let mut r = s.replication(4, Purpose::Truth);
        assert_ne!(a[0], r.next_u64());
        let other = Streams::new(43);
        let mut r = other.replication(3, Purpose::Truth);
        assert_ne!(a[0], r.next_u64());
    }

    #[test]
    fn open_unit_is_open() {
        let mut rng = Streams::new(7).experiment(Purpose::PValues);
        for _ in 0..10_000 {
            let u = open_unit(&mut rng);
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn uniform_index_in_range_and_covers() {
        let mut rng = Streams::new(9).experiment(Purpose::Graph);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            let i = uniform_index(&mut rng, 7);
            assert!(i < 7);
            seen[i] = true;
        }
        assert!(seen.iter().all(|&x| x));
        assert_eq!(uniform_index(&mut rng, 1), 0);
    }
}
