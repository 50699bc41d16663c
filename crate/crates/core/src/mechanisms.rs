//! The two DP primitives: the Laplace mechanism and the exponential
//! mechanism, over an explicit seedable randomness source.
//!
//! Randomness is always passed in; there is no global generator. This keeps
//! every mechanism resamplable in isolation, which the privacy auditor
//! relies on.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// An (epsilon, delta) privacy budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    /// Requires `epsilon > 0` and `delta` in `(0, 1]`. Pure-epsilon operation
    /// (`delta = 0`) is rejected: the coverage loop's per-pick epsilon
    /// `eps_s / (2 ln(e/delta_s))` degenerates there.
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be a positive real, got {epsilon}")));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1], got {delta}")));
        }
        Ok(PrivacyBudget { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Deterministic stream of uniform variates with indexed substreams.
///
/// The same seed always yields the same stream. `substream(i)` derives an
/// independent child stream from the parent seed and the index alone, so
/// fan-out does not depend on how much of the parent has been consumed.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream `index` of this source's seed.
    pub fn substream(&self, index: u64) -> RandomSource {
        RandomSource::new(mix(self.seed, index))
    }

    /// One uniform variate in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// One uniform variate in the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.rng.random::<f64>();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn uniform_range(&mut self, bound: usize) -> usize {
        self.rng.random_range(0..bound)
    }
}

impl rand::RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// SplitMix64 finalizer over (seed, index); used to derive substream seeds.
fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One zero-mean Laplace variate with the given scale, via inverse CDF on a
/// single uniform draw.
pub fn laplace_sample(scale: f64, rng: &mut RandomSource) -> Result<f64> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid(format!("laplace scale must be positive, got {scale}")));
    }
    // u in (-1/2, 1/2); x = -b * sgn(u) * ln(1 - 2|u|)
    let u = rng.uniform_open() - 0.5;
    let mag = 1.0 - 2.0 * u.abs();
    let mag = if mag > 0.0 { mag } else { f64::MIN_POSITIVE };
    Ok(-scale * u.signum() * mag.ln())
}

/// Standard Gumbel variate, `-ln(-ln(U))`.
fn gumbel_sample(rng: &mut RandomSource) -> f64 {
    let u = rng.uniform_open();
    -(-u.ln()).ln()
}

/// Selects index `i` with probability proportional to
/// `exp(eps_prime * scores[i])`.
///
/// Sampling uses the Gumbel-max trick (argmax of `eps_prime * score + Gumbel`
/// noise), which is exact in distribution and immune to overflow for scores
/// far beyond 1e6. `eps_prime = 0` reduces to a uniform pick.
pub fn exponential_select(scores: &[f64], eps_prime: f64, rng: &mut RandomSource) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::invalid("exponential_select needs at least one score"));
    }
    if !(eps_prime.is_finite() && eps_prime >= 0.0) {
        return Err(Error::invalid(format!("eps_prime must be a nonnegative real, got {eps_prime}")));
    }
    let mut best_idx = 0usize;
    let mut best_key = f64::NEG_INFINITY;
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::invalid(format!("score at index {i} is not finite: {s}")));
        }
        let key = eps_prime * s + gumbel_sample(rng);
        if key > best_key {
            best_key = key;
            best_idx = i;
        }
    }
    Ok(best_idx)
}

/// `count + Lap(sensitivity / eps)`. May be negative; clamping is the
/// consumer's decision.
pub fn noisy_count(count: f64, sensitivity: f64, eps: f64, rng: &mut RandomSource) -> Result<f64> {
    if !(sensitivity.is_finite() && sensitivity > 0.0) {
        return Err(Error::invalid(format!("sensitivity must be positive, got {sensitivity}")));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    Ok(count + laplace_sample(sensitivity / eps, rng)?)
}
