//! Per-replication random streams and the few variates the chain needs.

use libm::{floor, log};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream id reserved for the single-chain stationary mode.
pub const STREAM_MODE_STREAM: u64 = u64::MAX;

/// Busy-period sample `i` uses stream `BUSY_STREAM_BASE + i`, so it never
/// shares a stream with a tagged replication under the same seed.
pub const BUSY_STREAM_BASE: u64 = 1 << 63;

/// Random source for one replication, keyed by `(seed, stream)`.
///
/// ChaCha8 is counter based: stream `i` is independent of stream `j` and
/// costs nothing to reach, so replications may run in any order.
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Uniform on the open interval `(0, 1)` from 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Exponential with the given rate.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -log(self.uniform()) / rate
    }

    /// `1 + Geometric`: `P(X = k) = (1 − r) r^{k−1}`, `k ≥ 1`, by inversion.
    /// `ln_r` is `ln r`.
    pub fn shifted_geometric(&mut self, ln_r: f64) -> u64 {
        let x = floor(log(self.uniform()) / ln_r);
        if x >= u64::MAX as f64 {
            u64::MAX
        } else {
            1 + x as u64
        }
    }

    /// Uniform integer in `0..n` (multiply-shift; bias at most `n/2⁶⁴`).
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.rng.next_u64() as u128 * n as u128) >> 64) as u64
    }
}
