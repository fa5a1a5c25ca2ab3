//! Deterministic, splittable random number streams.
//!
//! Every Monte Carlo draw in this crate is a pure function of a
//! `(seed, stream_index)` pair. Sample index `i` of an estimator run maps to
//! a fixed stream index, so results do not depend on how samples are
//! partitioned across workers. Distinct operations salt the stream index
//! space (see [`salt`]) so that independent estimators never share a stream.

use rand_pcg::Pcg64;

/// A handle for one reproducible random stream.
///
/// Draws are a pure function of `(seed, stream_index)`; distinct stream
/// indices give independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        RandomStream { seed, stream_index }
    }

    /// Stream for sample `i` of the run identified by `op_salt`.
    pub fn for_sample(seed: u64, op_salt: u64, i: u64) -> Self {
        RandomStream {
            seed,
            stream_index: salt(op_salt, i),
        }
    }

    pub fn rng(&self) -> Pcg64 {
        rng_for(self.seed, self.stream_index)
    }
}

/// Combine an operation salt with a sample index into one stream index.
/// Sample counts stay below 2^40, leaving 24 bits for the salt.
pub fn salt(op_salt: u64, i: u64) -> u64 {
    debug_assert!(i < (1 << 40), "sample index exceeds stream space");
    (op_salt << 40) ^ i
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Expand `(seed, stream_index)` into a PCG-64 generator.
pub fn rng_for(seed: u64, stream_index: u64) -> Pcg64 {
    let mut s = seed ^ 0xA076_1D64_78BD_642F;
    let a = splitmix64(&mut s);
    let b = splitmix64(&mut s);
    let mut t = stream_index ^ 0xE703_7ED1_A0B4_28DB;
    let c = splitmix64(&mut t);
    let d = splitmix64(&mut t);
    let state = ((a ^ c) as u128) << 64 | b as u128;
    let incr = (d as u128) << 64 | (c.rotate_left(17) ^ b) as u128;
    Pcg64::new(state, incr | 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_pure_functions_of_seed_and_index() {
        let mut a = rng_for(7, 12345);
        let mut b = rng_for(7, 12345);
        for _ in 0..64 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn distinct_indices_differ() {
        let mut a = rng_for(7, 1);
        let mut b = rng_for(7, 2);
        let same = (0..64).filter(|_| a.random::<u64>() == b.random::<u64>()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn distinct_seeds_differ() {
        let mut a = rng_for(1, 0);
        let mut b = rng_for(2, 0);
        let same = (0..64).filter(|_| a.random::<u64>() == b.random::<u64>()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn crude_uniformity_of_one_stream() {
        let mut r = rng_for(42, 9);
        let n = 20_000;
        let mean: f64 = (0..n).map(|_| r.random::<f64>()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }
}
