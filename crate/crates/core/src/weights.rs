//! Synaptic weight codec.
//!
//! A weight is stored as a mantissa `w` and an exponent `theta`; the value
//! delivered to the compartment is `J = w * 2^(6 + theta)` after three
//! bit-level adjustments:
//!
//! 1. the mantissa is truncated toward zero onto the precision grid
//!    `2^n_s`, with `n_s = 8 - (weight_bits - is_mixed)`;
//! 2. the scaled value is clipped to 21 bits (`|J| <= 2^21 - 2^6`);
//! 3. the result is truncated toward zero to a multiple of `2^6`.
//!
//! Plastic weights update their mantissa by stochastic rounding onto the
//! same grid, then re-encode.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixedpoint::{round_away_from_zero, RandomStream};

pub const EXPONENT_MIN: i32 = -8;
pub const EXPONENT_MAX: i32 = 7;
/// Largest magnitude a scaled weight may take before the final shift.
pub const WEIGHT_LIMIT: i64 = (1 << 21) - (1 << 6);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WeightError {
    #[error("weight bits {0} outside [1, 8]")]
    WeightBits(u32),
    #[error("exponent {0} outside [{EXPONENT_MIN}, {EXPONENT_MAX}]")]
    Exponent(i32),
    #[error("mantissa {mantissa} outside [{low}, {high}] for {mode} sign mode")]
    Mantissa {
        mantissa: i64,
        mode: SignMode,
        low: i64,
        high: i64,
    },
    #[error("weight is static and cannot be updated")]
    Static,
    #[error("unknown sign mode '{0}'")]
    UnknownSignMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignMode {
    Excitatory,
    Inhibitory,
    Mixed,
}

impl SignMode {
    pub const ALL: [SignMode; 3] = [SignMode::Excitatory, SignMode::Inhibitory, SignMode::Mixed];

    /// Raw mantissa range accepted from the user.
    pub fn mantissa_range(self) -> (i64, i64) {
        match self {
            SignMode::Excitatory => (0, 255),
            SignMode::Inhibitory => (-255, 0),
            SignMode::Mixed => (-256, 254),
        }
    }

    fn sign_bit(self) -> u32 {
        u32::from(self == SignMode::Mixed)
    }

    /// The 256 raw mantissas a table sweep visits.
    pub fn mantissa_sweep(self) -> impl Iterator<Item = i64> {
        let (low, high) = self.mantissa_range();
        let step = if self == SignMode::Mixed { 2 } else { 1 };
        (low..=high).step_by(step)
    }
}

impl fmt::Display for SignMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignMode::Excitatory => "excitatory",
            SignMode::Inhibitory => "inhibitory",
            SignMode::Mixed => "mixed",
        })
    }
}

impl FromStr for SignMode {
    type Err = WeightError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "excitatory" | "exc" => Ok(SignMode::Excitatory),
            "inhibitory" | "inh" => Ok(SignMode::Inhibitory),
            "mixed" => Ok(SignMode::Mixed),
            other => Err(WeightError::UnknownSignMode(other.to_string())),
        }
    }
}

/// `n_s = 8 - (weight_bits - is_mixed)`; the grid spacing is `2^n_s`.
pub fn precision_exponent(weight_bits: u32, sign_mode: SignMode) -> Result<u32, WeightError> {
    if !(1..=8).contains(&weight_bits) {
        return Err(WeightError::WeightBits(weight_bits));
    }
    Ok(8 - (weight_bits - sign_mode.sign_bit()))
}

/// Storage format shared by all synapses of a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub sign_mode: SignMode,
    pub weight_bits: u32,
}

impl WeightConfig {
    pub fn new(sign_mode: SignMode, weight_bits: u32) -> Result<Self, WeightError> {
        precision_exponent(weight_bits, sign_mode)?;
        Ok(WeightConfig { sign_mode, weight_bits })
    }

    pub fn precision_exponent(&self) -> u32 {
        8 - (self.weight_bits - self.sign_mode.sign_bit())
    }

    pub fn precision(&self) -> i64 {
        1 << self.precision_exponent()
    }

    /// Clip range for plastic updates: the sign-mode range, pulled in to the
    /// nearest grid points so clipped mantissas stay representable.
    pub fn bounds(&self) -> (i64, i64) {
        let (low, high) = self.sign_mode.mantissa_range();
        (self.truncate(low), self.truncate(high))
    }

    /// Truncate toward zero onto the precision grid.
    pub fn truncate(&self, mantissa: i64) -> i64 {
        let n_s = self.precision_exponent();
        let mag = (mantissa.unsigned_abs() >> n_s) << n_s;
        if mantissa < 0 {
            -(mag as i64)
        } else {
            mag as i64
        }
    }

    fn check_mantissa(&self, mantissa: i64) -> Result<(), WeightError> {
        let (low, high) = self.sign_mode.mantissa_range();
        if (low..=high).contains(&mantissa) {
            Ok(())
        } else {
            Err(WeightError::Mantissa {
                mantissa,
                mode: self.sign_mode,
                low,
                high,
            })
        }
    }
}

fn check_exponent(exponent: i32) -> Result<(), WeightError> {
    if (EXPONENT_MIN..=EXPONENT_MAX).contains(&exponent) {
        Ok(())
    } else {
        Err(WeightError::Exponent(exponent))
    }
}

/// Full encoding result, including whether the 21-bit clip fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Encoded {
    pub mantissa: i64,
    pub actual: i64,
    pub clipped: bool,
}

pub fn encode_weight_detailed(mantissa: i64, exponent: i32, config: &WeightConfig) -> Result<Encoded, WeightError> {
    config.check_mantissa(mantissa)?;
    check_exponent(exponent)?;
    let shifted = config.truncate(mantissa);
    let mag = shifted.unsigned_abs() as i64;
    // |J_scaled| = mag * 2^(6 + theta); only integral when theta >= -6, and
    // the clip cannot trigger below that.
    let scale = 6 + exponent;
    let (mag_j, clipped) = if scale >= 0 {
        let scaled = mag << scale;
        let clipped = scaled > WEIGHT_LIMIT;
        (scaled.min(WEIGHT_LIMIT) >> 6 << 6, clipped)
    } else {
        // (mag / 2^-scale) truncated to a multiple of 64 is 0 for mag < 2^(6-scale)
        ((mag >> (-scale)) >> 6 << 6, false)
    };
    let actual = if shifted < 0 { -mag_j } else { mag_j };
    Ok(Encoded {
        mantissa: shifted,
        actual,
        clipped,
    })
}

pub fn encode_weight(mantissa: i64, exponent: i32, config: &WeightConfig) -> Result<i64, WeightError> {
    encode_weight_detailed(mantissa, exponent, config).map(|e| e.actual)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WeightTableRow {
    pub sign_mode: SignMode,
    #[serde(rename = "n_wb")]
    pub weight_bits: u32,
    /// Effective (grid-truncated) mantissa of the swept raw value.
    pub mantissa: i64,
    pub exponent: i32,
    pub actual_weight: i64,
    #[serde(skip)]
    pub clipped: bool,
}

/// Every mantissa/exponent combination of a sign mode: 256 mantissas times
/// 16 exponents.
pub fn weight_table(sign_mode: SignMode, weight_bits: u32) -> Result<Vec<WeightTableRow>, WeightError> {
    let config = WeightConfig::new(sign_mode, weight_bits)?;
    let mut rows = Vec::with_capacity(4096);
    for raw in sign_mode.mantissa_sweep() {
        for exponent in EXPONENT_MIN..=EXPONENT_MAX {
            let e = encode_weight_detailed(raw, exponent, &config)?;
            rows.push(WeightTableRow {
                sign_mode,
                weight_bits,
                mantissa: e.mantissa,
                exponent,
                actual_weight: e.actual,
                clipped: e.clipped,
            });
        }
    }
    Ok(rows)
}

/// A single synapse's weight in both representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynapticWeight {
    pub mantissa: i64,
    pub exponent: i32,
    pub actual: i64,
    pub plastic: bool,
}

impl SynapticWeight {
    pub fn new(mantissa: i64, exponent: i32, plastic: bool, config: &WeightConfig) -> Result<Self, WeightError> {
        let e = encode_weight_detailed(mantissa, exponent, config)?;
        Ok(SynapticWeight {
            mantissa: e.mantissa,
            exponent,
            actual: e.actual,
            plastic,
        })
    }
}

/// Apply a learning-rule output to a plastic weight.
///
/// `dw` is first rounded away from zero; its whole multiples of the
/// precision are applied directly and the leftover `r` moves the mantissa
/// one more grid step in the direction of `dw` with probability
/// `r / precision`. The result is clipped to [`WeightConfig::bounds`].
pub fn apply_weight_delta(
    weight: &mut SynapticWeight,
    dw: f64,
    config: &WeightConfig,
    rng: &mut RandomStream,
) -> Result<(), WeightError> {
    if !weight.plastic {
        return Err(WeightError::Static);
    }
    let dw_rounded = round_away_from_zero(dw);
    if dw_rounded == 0 {
        return Ok(());
    }
    let precision = config.precision();
    let quotient = dw_rounded / precision;
    let remainder = dw_rounded.abs() % precision;
    let extra = if remainder > 0 && rng.uniform() < remainder as f64 / precision as f64 {
        dw_rounded.signum()
    } else {
        0
    };
    let (low, high) = config.bounds();
    let mantissa = weight
        .mantissa
        .saturating_add((quotient + extra).saturating_mul(precision))
        .clamp(low, high);
    weight.mantissa = mantissa;
    weight.actual = encode_weight(mantissa, weight.exponent, config)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(mode: SignMode, bits: u32) -> WeightConfig {
        WeightConfig::new(mode, bits).unwrap()
    }

    #[test]
    fn precision_examples() {
        assert_eq!(precision_exponent(8, SignMode::Excitatory).unwrap(), 0);
        assert_eq!(precision_exponent(6, SignMode::Excitatory).unwrap(), 2);
        assert_eq!(precision_exponent(8, SignMode::Mixed).unwrap(), 1);
        assert_eq!(precision_exponent(1, SignMode::Mixed).unwrap(), 8);
        assert!(precision_exponent(0, SignMode::Mixed).is_err());
        assert!(precision_exponent(9, SignMode::Excitatory).is_err());
    }

    #[test]
    fn encode_examples() {
        let exc8 = cfg(SignMode::Excitatory, 8);
        assert_eq!(encode_weight(254, 0, &exc8).unwrap(), 16256);
        assert_eq!(encode_weight(128, -6, &exc8).unwrap(), 128);
        // grid of 4: 37 -> 36 -> 36 * 64
        assert_eq!(encode_weight(37, 0, &cfg(SignMode::Excitatory, 6)).unwrap(), 2304);
        assert_eq!(encode_weight(35, 0, &cfg(SignMode::Excitatory, 6)).unwrap(), 2048);
        for theta in EXPONENT_MIN..=EXPONENT_MAX {
            assert_eq!(encode_weight(0, theta, &exc8).unwrap(), 0);
        }
        assert_eq!(encode_weight(255, 7, &exc8).unwrap(), 2_088_960);
    }

    #[test]
    fn negative_mantissas_truncate_toward_zero() {
        let inh6 = cfg(SignMode::Inhibitory, 6);
        assert_eq!(inh6.truncate(-37), -36);
        assert_eq!(encode_weight(-37, 0, &inh6).unwrap(), -2304);
        // -3 * 2^-2 = -0.75 truncates to 0, not -64
        assert_eq!(encode_weight(-3, -8, &cfg(SignMode::Inhibitory, 8)).unwrap(), 0);
    }

    #[test]
    fn only_minus_256_at_seven_clips() {
        let mixed = cfg(SignMode::Mixed, 8);
        let e = encode_weight_detailed(-256, 7, &mixed).unwrap();
        assert!(e.clipped);
        assert_eq!(e.actual, -WEIGHT_LIMIT);
        assert!(!encode_weight_detailed(254, 7, &mixed).unwrap().clipped);
    }

    #[test]
    fn out_of_range_inputs() {
        let exc8 = cfg(SignMode::Excitatory, 8);
        assert!(encode_weight(256, 0, &exc8).is_err());
        assert!(encode_weight(-1, 0, &exc8).is_err());
        assert!(encode_weight(1, 8, &exc8).is_err());
        assert!(encode_weight(1, -9, &exc8).is_err());
        assert!(encode_weight(255, 0, &cfg(SignMode::Mixed, 8)).is_err());
    }

    #[test]
    fn table_shape() {
        for mode in SignMode::ALL {
            for bits in 1..=8 {
                let rows = weight_table(mode, bits).unwrap();
                assert_eq!(rows.len(), 4096);
                let clipped = rows.iter().filter(|r| r.clipped).count();
                assert_eq!(clipped, usize::from(mode == SignMode::Mixed));
                let p = cfg(mode, bits).precision();
                for r in &rows {
                    assert_eq!(r.actual_weight % 64, 0);
                    assert_eq!(r.mantissa % p, 0);
                    assert!(r.actual_weight.abs() <= WEIGHT_LIMIT);
                }
            }
        }
    }

    #[test]
    fn bounds_are_on_grid() {
        assert_eq!(cfg(SignMode::Excitatory, 6).bounds(), (0, 252));
        assert_eq!(cfg(SignMode::Mixed, 8).bounds(), (-256, 254));
        assert_eq!(cfg(SignMode::Inhibitory, 1).bounds(), (-128, 0));
    }

    #[test]
    fn delta_precision_one_is_exact() {
        let c = cfg(SignMode::Excitatory, 8);
        let mut rng = RandomStream::new(0);
        let mut w = SynapticWeight::new(100, 0, true, &c).unwrap();
        apply_weight_delta(&mut w, 1.0, &c, &mut rng).unwrap();
        assert_eq!(w.mantissa, 101);
        assert_eq!(w.actual, 101 * 64);
        // 0.2 rounds away from zero to 1
        apply_weight_delta(&mut w, 0.2, &c, &mut rng).unwrap();
        assert_eq!(w.mantissa, 102);
        apply_weight_delta(&mut w, -2.5, &c, &mut rng).unwrap();
        assert_eq!(w.mantissa, 99);
    }

    #[test]
    fn delta_stochastic_half() {
        let c = cfg(SignMode::Excitatory, 7);
        assert_eq!(c.precision(), 2);
        let mut rng = RandomStream::new(11);
        let n = 100_000;
        let mut ups = 0;
        for _ in 0..n {
            let mut w = SynapticWeight::new(100, 0, true, &c).unwrap();
            apply_weight_delta(&mut w, 1.0, &c, &mut rng).unwrap();
            assert!(w.mantissa == 100 || w.mantissa == 102);
            ups += usize::from(w.mantissa == 102);
        }
        assert!((ups as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn negative_delta_steps_down() {
        let c = cfg(SignMode::Mixed, 8);
        let mut rng = RandomStream::new(5);
        let mut w = SynapticWeight::new(0, 0, true, &c).unwrap();
        for _ in 0..20 {
            apply_weight_delta(&mut w, -3.0, &c, &mut rng).unwrap();
            assert_eq!(w.mantissa % 2, 0);
        }
        assert!(w.mantissa <= -40 && w.mantissa >= -80);
    }

    #[test]
    fn delta_clips() {
        let c = cfg(SignMode::Excitatory, 8);
        let mut rng = RandomStream::new(0);
        let mut w = SynapticWeight::new(255, 0, true, &c).unwrap();
        apply_weight_delta(&mut w, 10.0, &c, &mut rng).unwrap();
        assert_eq!(w.mantissa, 255);
        apply_weight_delta(&mut w, -1000.0, &c, &mut rng).unwrap();
        assert_eq!(w.mantissa, 0);
    }

    #[test]
    fn static_weight_rejects_delta() {
        let c = cfg(SignMode::Excitatory, 8);
        let mut w = SynapticWeight::new(10, 0, false, &c).unwrap();
        let err = apply_weight_delta(&mut w, 1.0, &c, &mut RandomStream::new(0));
        assert_eq!(err, Err(WeightError::Static));
    }

    fn any_config() -> impl Strategy<Value = WeightConfig> {
        (prop::sample::select(SignMode::ALL.to_vec()), 1u32..=8).prop_map(|(m, b)| WeightConfig::new(m, b).unwrap())
    }

    proptest! {
        #[test]
        fn encoding_is_idempotent(c in any_config(), frac in 0.0f64..1.0, theta in EXPONENT_MIN..=EXPONENT_MAX) {
            let (low, high) = c.sign_mode.mantissa_range();
            let m = low + ((high - low) as f64 * frac) as i64;
            let first = encode_weight_detailed(m, theta, &c).unwrap();
            let second = encode_weight_detailed(first.mantissa, theta, &c).unwrap();
            prop_assert_eq!(first, second);
        }

        #[test]
        fn encoding_is_monotone(c in any_config(), theta in EXPONENT_MIN..=EXPONENT_MAX) {
            let (low, high) = c.sign_mode.mantissa_range();
            let mut prev = i64::MIN;
            for m in low..=high {
                let j = encode_weight(m, theta, &c).unwrap();
                prop_assert!(j >= prev);
                prev = j;
            }
        }

        #[test]
        fn plastic_updates_stay_on_grid(c in any_config(), dws in prop::collection::vec(-300.0f64..300.0, 1..50), seed: u64) {
            let mut rng = RandomStream::new(seed);
            let mut w = SynapticWeight::new(0, 0, true, &c).unwrap();
            let (low, high) = c.bounds();
            for dw in dws {
                apply_weight_delta(&mut w, dw, &c, &mut rng).unwrap();
                prop_assert_eq!(w.mantissa % c.precision(), 0);
                prop_assert!(w.mantissa >= low && w.mantissa <= high);
                prop_assert_eq!(w.actual, encode_weight(w.mantissa, 0, &c).unwrap());
            }
        }
    }
}
