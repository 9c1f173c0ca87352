//! Portable, counter-based random numbers.
//!
//! Every random draw in the toolkit goes through [`StreamRng`], which wraps
//! the ChaCha8 stream cipher keyed by a 64-bit seed (expanded with the
//! PCG32-based `seed_from_u64` of `rand_core`) and a 64-bit stream id. The
//! derived distributions are fixed here so that other implementations can
//! reproduce them:
//!
//! - `uniform()`: `(next_u64 >> 11) * 2^-53`, in `[0, 1)`.
//! - `below(n)`: Lemire's widening-multiply rejection on `next_u64`.
//! - `gaussian()`: Box–Muller, `sqrt(-2 ln(1 - u1)) * cos(2π u2)` using two
//!   fresh uniforms per draw (the sine branch is discarded).

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent generator for `(seed, stream)`, e.g. one stream per
    /// bootstrap resample so results do not depend on scheduling.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Unit vector uniform on the sphere.
    pub fn unit_vector(&mut self) -> [f64; 3] {
        loop {
            let v = [self.gaussian(), self.gaussian(), self.gaussian()];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e-12 {
                return [v[0] / n, v[1] / n, v[2] / n];
            }
        }
    }
}
