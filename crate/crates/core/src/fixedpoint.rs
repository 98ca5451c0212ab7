//! Integer primitives shared by the compartment, synapse and trace dynamics.
//!
//! Everything on the chip is integer arithmetic. Two rounding schemes are in
//! play: round-away-from-zero for the deterministic compartment decay, and
//! stochastic rounding (driven by [`RandomStream`]) for plastic weights and
//! learning traces.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Denominator of the decay factors: `tau = 2^12 / delta`.
pub const DECAY_SCALE_BITS: u32 = 12;
pub const DECAY_SCALE: i64 = 1 << DECAY_SCALE_BITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ArithmeticError {
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("decay factor {0} outside [0, 4096]")]
pub struct DecayRangeError(pub i64);

/// Per-step decay of a compartment variable, in units of `2^-12`.
///
/// `0` disables decay entirely; `4096` clears the variable every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct DecayFactor(u16);

impl DecayFactor {
    pub const NONE: DecayFactor = DecayFactor(0);
    pub const FULL: DecayFactor = DecayFactor(4096);

    pub fn new(raw: i64) -> Result<Self, DecayRangeError> {
        if (0..=DECAY_SCALE).contains(&raw) {
            Ok(DecayFactor(raw as u16))
        } else {
            Err(DecayRangeError(raw))
        }
    }

    pub fn raw(self) -> i64 {
        i64::from(self.0)
    }

    /// The time constant `2^12 / delta` this factor approximates
    /// (infinite for `delta = 0`).
    pub fn tau(self) -> f64 {
        DECAY_SCALE as f64 / f64::from(self.0)
    }
}

impl TryFrom<i64> for DecayFactor {
    type Error = DecayRangeError;
    fn try_from(raw: i64) -> Result<Self, Self::Error> {
        DecayFactor::new(raw)
    }
}

impl From<DecayFactor> for i64 {
    fn from(d: DecayFactor) -> i64 {
        d.raw()
    }
}

/// `sign(x) * ceil(|x|)`.
pub fn round_away_from_zero(x: f64) -> i64 {
    debug_assert!(x.is_finite());
    if x == 0.0 {
        0
    } else {
        (x.signum() * x.abs().ceil()) as i64
    }
}

/// Integer division `num / 2^shift` rounded away from zero, without going
/// through floating point.
fn div_pow2_away_from_zero(num: i64, shift: u32) -> i64 {
    let mask = (1i64 << shift) - 1;
    let mag = num.unsigned_abs();
    let q = (mag >> shift) + u64::from(mag & mask as u64 != 0);
    if num < 0 {
        -(q as i64)
    } else {
        q as i64
    }
}

/// One decay step: `state - rnd(state * delta / 2^12)` with `rnd` rounding
/// away from zero.
pub fn decay_step(state: i64, delta: DecayFactor) -> Result<i64, ArithmeticError> {
    let product = state
        .checked_mul(delta.raw())
        .ok_or(ArithmeticError::Overflow("decay product"))?;
    let decrement = div_pow2_away_from_zero(product, DECAY_SCALE_BITS);
    state.checked_sub(decrement).ok_or(ArithmeticError::Overflow("decay"))
}

/// Stochastic rounding of `x` to the grid `2^grid_bits`.
///
/// The magnitude is rounded down to the grid with probability
/// `1 - remainder / step` and up otherwise; the sign is reattached
/// afterwards, so the result is unbiased: `E[result] = x`.
pub fn stochastic_round(x: f64, grid_bits: u32, rng: &mut RandomStream) -> i64 {
    let step = f64::from(1u32 << grid_bits);
    let mag = x.abs();
    let floor = (mag / step).floor() * step;
    let remainder = mag - floor;
    let up = remainder > 0.0 && rng.uniform() < remainder / step;
    let rounded = if up { floor + step } else { floor } as i64;
    if x < 0.0 {
        -rounded
    } else {
        rounded
    }
}

/// Stochastic rounding of a nonnegative value to the integers.
pub fn stochastic_round_unit(x: f64, rng: &mut RandomStream) -> i64 {
    debug_assert!(x >= 0.0);
    let floor = x.floor();
    let frac = x - floor;
    let up = frac > 0.0 && rng.uniform() < frac;
    floor as i64 + i64::from(up)
}

/// Deterministic uniform random source.
///
/// The generator is xoshiro256++ (Blackman & Vigna): 256 bits of state
/// `s0..s3`, output `rotl(s0 + s3, 23) + s0`, then
/// `t = s1 << 17; s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45)`.
/// Seeding expands a 64-bit seed through SplitMix64. Uniform reals take the
/// top 53 bits of one output, so draws are identical on every platform.
#[derive(Debug, Clone)]
pub struct RandomStream {
    inner: Xoshiro256PlusPlus,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// Independent stream for one `(entity, purpose)` pair under a master
    /// seed. Adding entities never perturbs the streams of existing ones.
    pub fn substream(seed: u64, entity: &str, purpose: &str) -> Self {
        let mixed = splitmix64(seed ^ splitmix64(fnv1a(entity.as_bytes())))
            ^ splitmix64(fnv1a(purpose.as_bytes()).rotate_left(17));
        RandomStream::new(mixed)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
