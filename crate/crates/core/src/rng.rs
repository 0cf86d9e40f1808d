//! Counter-based deterministic randomness.
//!
//! Every random quantity in the crate is derived from a single master seed
//! and a stream index through stateless mixing, so per-trial streams do not
//! depend on execution order and parallel sweeps reproduce bit-identically.

/// SplitMix64 finalizer. Good avalanche, cheap, stateless.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A keyed counter stream: `n`-th output is a pure function of (seed, n).
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// Stream `stream` of master seed `seed`. Distinct streams are
    /// independent for all practical purposes.
    pub fn new(seed: u64, stream: u64) -> Self {
        let key = splitmix64(seed ^ splitmix64(stream.wrapping_mul(0xa076_1d64_78bd_642f)));
        CounterRng { key, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = splitmix64(self.key.wrapping_add(self.counter.wrapping_mul(0xd6e8_feb8_6659_fd93)));
        self.counter += 1;
        v
    }

    /// Uniform in (0, 1]; never returns 0 so it is safe inside logs.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 1.0) / (1u64 << 53) as f64
    }

    /// Standard complex Gaussian (unit variance per real component),
    /// via Box-Muller.
    pub fn next_complex_gaussian(&mut self) -> (f64, f64) {
        let u1 = self.next_unit();
        let u2 = self.next_unit();
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        (r * th.cos(), r * th.sin())
    }
}

/// One Gaussian pair addressed purely by (seed, stream, index). Used where
/// modes are filled in parallel and the fill order must not matter.
#[inline]
pub fn indexed_gaussian(seed: u64, stream: u64, index: u64) -> (f64, f64) {
    let mut r = CounterRng::new(seed, stream);
    r.counter = index.wrapping_mul(2);
    r.next_complex_gaussian()
}
