use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixedpoint::{stochastic_round_unit, RandomStream};

pub const TRACE_MAX: i64 = 127;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceParamError {
    #[error("trace impulse {0} outside [0, 127]")]
    Impulse(i64),
    #[error("trace time constant must be at least 1, got {0}")]
    Tau(u32),
}

/// Impulse added on a spike and decay time constant of one trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceParams {
    pub impulse: i64,
    pub tau: u32,
}

impl TraceParams {
    pub fn new(impulse: i64, tau: u32) -> Result<Self, TraceParamError> {
        let p = TraceParams { impulse, tau };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), TraceParamError> {
        if !(0..=TRACE_MAX).contains(&self.impulse) {
            return Err(TraceParamError::Impulse(self.impulse));
        }
        if self.tau == 0 {
            return Err(TraceParamError::Tau(self.tau));
        }
        Ok(())
    }

    /// First-order decay factor `1 - 1/tau`.
    pub fn alpha(&self) -> f64 {
        1.0 - 1.0 / f64::from(self.tau)
    }
}

/// Pre- (`x1`, `x2`) and post-synaptic (`y1`, `y2`, `y3`) traces of one synapse.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraceState {
    pub x1: i64,
    pub x2: i64,
    pub y1: i64,
    pub y2: i64,
    pub y3: i64,
}

/// Decay a trace by `1 - 1/tau` with stochastic rounding, then add the
/// impulse on a spike, saturating at 127.
pub fn decay_and_impulse(trace: i64, params: &TraceParams, spiked: bool, rng: &mut RandomStream) -> i64 {
    debug_assert!((0..=TRACE_MAX).contains(&trace));
    let decayed = if trace == 0 {
        0
    } else {
        stochastic_round_unit(trace as f64 * params.alpha(), rng)
    };
    if spiked {
        (decayed + params.impulse).min(TRACE_MAX)
    } else {
        decayed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_decay_point() {
        let p = TraceParams::new(120, 8).unwrap();
        let mut rng = RandomStream::new(0);
        for _ in 0..1000 {
            assert_eq!(decay_and_impulse(120, &p, false, &mut rng), 105);
        }
    }

    #[test]
    fn zero_is_fixed() {
        let mut rng = RandomStream::new(0);
        for tau in [1, 2, 8, 100] {
            let p = TraceParams::new(50, tau).unwrap();
            assert_eq!(decay_and_impulse(0, &p, false, &mut rng), 0);
        }
    }

    #[test]
    fn impulse_saturates() {
        let p = TraceParams::new(120, 8).unwrap();
        let mut rng = RandomStream::new(0);
        assert_eq!(decay_and_impulse(120, &p, true, &mut rng), 127);
        assert_eq!(decay_and_impulse(0, &p, true, &mut rng), 120);
    }

    #[test]
    fn tau_one_clears() {
        let p = TraceParams::new(10, 1).unwrap();
        let mut rng = RandomStream::new(0);
        assert_eq!(decay_and_impulse(127, &p, false, &mut rng), 0);
        assert_eq!(decay_and_impulse(127, &p, true, &mut rng), 10);
    }

    #[test]
    fn param_validation() {
        assert!(TraceParams::new(128, 8).is_err());
        assert!(TraceParams::new(-1, 8).is_err());
        assert!(TraceParams::new(0, 0).is_err());
    }

    #[test]
    fn no_impulse_converges_to_zero() {
        let p = TraceParams::new(0, 16).unwrap();
        let mut rng = RandomStream::new(4);
        let mut x = 127;
        for _ in 0..2000 {
            x = decay_and_impulse(x, &p, true, &mut rng);
        }
        assert_eq!(x, 0);
    }

    proptest! {
        #[test]
        fn traces_stay_in_range(
            impulse in 0i64..=127,
            tau in 1u32..200,
            spikes in prop::collection::vec(any::<bool>(), 1..300),
            seed: u64,
        ) {
            let p = TraceParams::new(impulse, tau).unwrap();
            let mut rng = RandomStream::new(seed);
            let mut x = 0;
            for s in spikes {
                x = decay_and_impulse(x, &p, s, &mut rng);
                prop_assert!((0..=TRACE_MAX).contains(&x));
            }
        }
    }
}
