//! Integer-exact emulation of Loihi's computational unit.
//!
//! The crate is organised bottom-up:
//!
//! - [`fixedpoint`]: rounding primitives and the seeded random stream;
//! - [`neuron`]: the single-compartment update;
//! - [`weights`]: mantissa/exponent weight codec and plastic updates;
//! - [`plasticity`]: learning traces and the learning-rule language;
//! - [`engine`]: network definitions, the clock-driven simulator and monitors.

pub mod engine;
pub mod fixedpoint;
pub mod neuron;
pub mod plasticity;
pub mod weights;
