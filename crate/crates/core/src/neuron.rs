//! Single-compartment dynamics.
//!
//! Per step: the synaptic input decays and accumulates the weighted spikes
//! that arrived this step; the voltage decays, integrates the new input and
//! the bias, and fires when it strictly exceeds `v_mantissa * 2^6`. A unit
//! that fired is reset to zero and held there for `refractory` steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixedpoint::{decay_step, ArithmeticError, DecayFactor};

pub const V_MANTISSA_MAX: i64 = 131_071;
pub const THRESHOLD_SHIFT: u32 = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("v_mantissa {0} outside [0, {V_MANTISSA_MAX}]")]
    VMantissa(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompartmentParams {
    pub delta_i: DecayFactor,
    pub delta_v: DecayFactor,
    pub v_mantissa: i64,
    #[serde(default)]
    pub bias: i64,
    #[serde(default)]
    pub refractory: u32,
}

impl CompartmentParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(0..=V_MANTISSA_MAX).contains(&self.v_mantissa) {
            return Err(ParamError::VMantissa(self.v_mantissa));
        }
        Ok(())
    }

    pub fn threshold(&self) -> i64 {
        self.v_mantissa << THRESHOLD_SHIFT
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompartmentState {
    pub current: i64,
    pub voltage: i64,
    pub refrac_left: u32,
}

/// Decay the synaptic input and add this step's weighted spikes.
pub fn update_current(
    state: &mut CompartmentState,
    params: &CompartmentParams,
    weighted_input: i64,
) -> Result<(), ArithmeticError> {
    state.current = decay_step(state.current, params.delta_i)?
        .checked_add(weighted_input)
        .ok_or(ArithmeticError::Overflow("synaptic input"))?;
    Ok(())
}

/// Voltage update against the already-updated current. Returns whether the
/// unit crossed threshold; the caller applies [`reset`] on a spike.
pub fn update_voltage(state: &mut CompartmentState, params: &CompartmentParams) -> Result<bool, ArithmeticError> {
    if state.refrac_left > 0 {
        state.voltage = 0;
        state.refrac_left -= 1;
        return Ok(false);
    }
    state.voltage = decay_step(state.voltage, params.delta_v)?
        .checked_add(state.current)
        .and_then(|v| v.checked_add(params.bias))
        .ok_or(ArithmeticError::Overflow("voltage"))?;
    Ok(state.voltage > params.threshold())
}

pub fn reset(state: &mut CompartmentState, params: &CompartmentParams) {
    state.voltage = 0;
    state.refrac_left = params.refractory;
}

/// One full step of a compartment.
pub fn step_compartment(
    mut state: CompartmentState,
    params: &CompartmentParams,
    weighted_input: i64,
) -> Result<(CompartmentState, bool), ArithmeticError> {
    update_current(&mut state, params, weighted_input)?;
    let spiked = update_voltage(&mut state, params)?;
    if spiked {
        reset(&mut state, params);
    }
    Ok((state, spiked))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(di: i64, dv: i64, vm: i64) -> CompartmentParams {
        CompartmentParams {
            delta_i: DecayFactor::new(di).unwrap(),
            delta_v: DecayFactor::new(dv).unwrap(),
            v_mantissa: vm,
            bias: 0,
            refractory: 0,
        }
    }

    #[test]
    fn single_input_current_halves() {
        let p = params(2048, 4096, V_MANTISSA_MAX);
        let mut s = CompartmentState::default();
        let mut seen = Vec::new();
        for t in 0..3 {
            let input = if t == 0 { 64 } else { 0 };
            let (next, spiked) = step_compartment(s, &p, input).unwrap();
            assert!(!spiked);
            seen.push(next.current);
            s = next;
        }
        assert_eq!(seen, vec![64, 32, 16]);
    }

    #[test]
    fn perfect_integrator() {
        let p = params(4096, 0, V_MANTISSA_MAX);
        let mut s = CompartmentState::default();
        for k in 1..=50 {
            s = step_compartment(s, &p, 10).unwrap().0;
            assert_eq!(s.voltage, 10 * k);
        }
    }

    #[test]
    fn strict_threshold() {
        let p = params(4096, 4096, 1);
        let th = p.threshold();
        assert_eq!(th, 64);
        let (s, spiked) = step_compartment(CompartmentState::default(), &p, th).unwrap();
        assert!(!spiked);
        assert_eq!(s.voltage, th);
        let (s, spiked) = step_compartment(CompartmentState::default(), &p, th + 1).unwrap();
        assert!(spiked);
        assert_eq!(s.voltage, 0);
    }

    #[test]
    fn bias_enters_voltage() {
        let mut p = params(4096, 4096, V_MANTISSA_MAX);
        p.bias = 7;
        let (s, _) = step_compartment(CompartmentState::default(), &p, 0).unwrap();
        assert_eq!(s.current, 0);
        assert_eq!(s.voltage, 7);
    }

    #[test]
    fn refractory_clamps_voltage() {
        let mut p = params(0, 0, 1);
        p.refractory = 3;
        let mut s = CompartmentState::default();
        let mut volts = Vec::new();
        let mut spikes = Vec::new();
        for t in 0..8 {
            let input = if t == 0 { 1000 } else { 0 };
            let (next, spiked) = step_compartment(s, &p, input).unwrap();
            volts.push(next.voltage);
            spikes.push(spiked);
            s = next;
        }
        // constant current 1000 with no decay: spikes, 3 clamped steps, spikes again
        assert_eq!(spikes, [true, false, false, false, true, false, false, false]);
        assert_eq!(volts, [0; 8]);
    }

    #[test]
    fn zero_refractory_allows_consecutive_spikes() {
        let p = params(0, 4096, 0);
        let mut s = CompartmentState::default();
        for t in 0..5 {
            let (next, spiked) = step_compartment(s, &p, if t == 0 { 10 } else { 0 }).unwrap();
            assert!(spiked);
            s = next;
        }
    }

    #[test]
    fn leak_converges_without_crossing_zero() {
        let p = params(4096, 300, V_MANTISSA_MAX);
        for start in [-100_000i64, -7, 5, 999_999] {
            let mut s = CompartmentState {
                voltage: start,
                ..Default::default()
            };
            let mut prev = start.abs();
            for _ in 0..500 {
                s = step_compartment(s, &p, 0).unwrap().0;
                assert!(s.voltage.abs() <= prev);
                assert!(s.voltage == 0 || s.voltage.signum() == start.signum());
                prev = s.voltage.abs();
            }
            assert_eq!(s.voltage, 0);
        }
    }

    #[test]
    fn overflow_is_an_error() {
        let p = params(0, 0, V_MANTISSA_MAX);
        let s = CompartmentState {
            current: i64::MAX - 1,
            ..Default::default()
        };
        assert!(step_compartment(s, &p, 10).is_err());
    }

    #[test]
    fn param_validation() {
        assert!(params(0, 0, V_MANTISSA_MAX + 1).validate().is_err());
        assert!(params(0, 0, -1).validate().is_err());
        assert!(params(0, 0, 0).validate().is_ok());
    }
}
