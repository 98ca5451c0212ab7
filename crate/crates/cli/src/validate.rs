use std::path::Path;

use anyhow::Context;
use clap::ValueEnum;
use loihi_core::plasticity::LearningRule;
use loihi_core::weights::SignMode;
use loihi_oracle::{
    equivalence_experiment, float_sanity_experiment, stdp_window_experiment, trace_experiment,
    weight_interval_experiment, ValidationReport,
};

use crate::error::CliError;

pub const STDP_RULE: &str = "2^-2*x1*y0 - 2^-2*y1*x0";
pub const STDP_TAU: u32 = 8;
pub const STDP_TRIALS: usize = 400;
pub const INTERVAL_SAMPLES: usize = 8000;
pub const TRACE_TAUS: [u32; 4] = [4, 8, 16, 32];
pub const TRACE_TRIALS: usize = 400;
pub const ORACLE_INSTANCES: usize = 100;
pub const ORACLE_STEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    Weights,
    Traces,
    Oracle,
    Stdp,
}

pub fn weight_reports(seed: u64) -> Vec<ValidationReport> {
    [SignMode::Excitatory, SignMode::Mixed]
        .into_iter()
        .flat_map(|mode| (1..=8).map(move |bits| weight_interval_experiment(bits, mode, INTERVAL_SAMPLES, seed)))
        .collect()
}

pub fn stdp_rule() -> LearningRule {
    LearningRule::parse(STDP_RULE).expect("built-in rule parses")
}

pub fn reports(suite: Suite, seed: u64) -> Vec<ValidationReport> {
    let mut out = Vec::new();
    if matches!(suite, Suite::All | Suite::Weights) {
        out.extend(weight_reports(seed));
    }
    if matches!(suite, Suite::All | Suite::Traces) {
        out.push(trace_experiment(&TRACE_TAUS, TRACE_TRIALS, seed));
    }
    if matches!(suite, Suite::All | Suite::Oracle) {
        out.push(equivalence_experiment(ORACLE_INSTANCES, ORACLE_STEPS, seed));
        out.push(float_sanity_experiment(&[16, 32, 64], seed));
    }
    if matches!(suite, Suite::All | Suite::Stdp) {
        out.push(stdp_window_experiment(&stdp_rule(), STDP_TAU, STDP_TRIALS, seed).report);
    }
    out
}

pub fn print_report(report: &ValidationReport) {
    for m in &report.metrics {
        println!(
            "{} {} {}: observed {} expected {} tolerance {}",
            if m.passed { "PASS" } else { "FAIL" },
            report.experiment,
            m.name,
            m.observed,
            m.expected,
            m.tolerance
        );
    }
}

pub fn execute(suite: Suite, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let reports = reports(suite, seed);
    let mut failed = 0;
    for report in &reports {
        print_report(report);
        failed += report.failures().count();
        if let Some(dir) = out {
            report
                .write_to(dir)
                .with_context(|| format!("writing report {}", report.experiment))?;
        }
    }
    if failed > 0 {
        Err(CliError::Failed(failed))
    } else {
        Ok(())
    }
}
