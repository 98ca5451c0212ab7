//! Independent references and statistical validators for `loihi-core`.
//!
//! [`scalar`] re-derives single-unit dynamics without touching the engine's
//! arithmetic. [`experiments`] drives the core through repeatable
//! statistical checks and returns a [`ValidationReport`] for each.

pub mod experiments;
pub mod report;
pub mod scalar;

pub use experiments::{
    compare_instance, equivalence_experiment, float_sanity_experiment, stdp_window_experiment, trace_experiment,
    weight_interval_experiment, Mismatches, StdpSample, StdpWindow, UnitInstance,
};
pub use report::{Metric, ReportError, Table, ValidationReport};
pub use scalar::{closed_form_current, scalar_algorithm1, scalar_weight, ScalarParams, ScalarTrace};
