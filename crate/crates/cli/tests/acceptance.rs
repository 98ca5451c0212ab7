//! Acceptance gate. Each test prints one `ACCEPTANCE` line with its verdict
//! before asserting, so `cargo test --test acceptance -- --nocapture`
//! gives a one-line-per-criterion summary.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use loihi_core::engine::RunConfig;
use loihi_core::fixedpoint::{round_away_from_zero, stochastic_round, RandomStream};
use loihi_core::plasticity::{decay_and_impulse, LearningRule, TraceParams, TRACE_MAX};
use loihi_core::weights::{encode_weight, weight_table, SignMode, WeightConfig, WEIGHT_LIMIT};
use loihi_oracle::{
    equivalence_experiment, stdp_window_experiment, trace_experiment, weight_interval_experiment, ValidationReport,
};

const SEED: u64 = 1;
const ORACLE_TIME_LIMIT: Duration = Duration::from_secs(60);
const NETWORK_TIME_LIMIT: Duration = Duration::from_secs(120);

fn verdict(id: u32, name: &str, passed: bool, detail: &str) {
    println!(
        "ACCEPTANCE {id} {name}: {} ({detail})",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {id} failed: {detail}");
}

fn failures(reports: &[ValidationReport]) -> Vec<String> {
    reports
        .iter()
        .flat_map(|r| {
            r.failures()
                .map(move |m| format!("{}/{}={} vs {}", r.experiment, m.name, m.observed, m.expected))
        })
        .collect()
}

#[test]
fn criterion_1_oracle_bit_exactness() {
    let start = Instant::now();
    let report = equivalence_experiment(100, 100_000, SEED);
    let elapsed = start.elapsed();
    let mismatches: f64 = report.metrics[..3].iter().map(|m| m.observed).sum();
    verdict(
        1,
        "oracle bit-exactness",
        report.passed && elapsed < ORACLE_TIME_LIMIT,
        &format!(
            "100 configs x 100000 steps, {mismatches} mismatches, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

fn run_network(out: &Path) -> Duration {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_loihi-emu"))
        .args(["demo", "network500", "--out"])
        .arg(out)
        .status()
        .expect("binary runs");
    assert!(status.success());
    start.elapsed()
}

#[test]
fn criterion_2_network_determinism() {
    let config = RunConfig::from_toml_str(include_str!("../../../configs/network500.toml")).unwrap();
    let net = &config.network;
    assert_eq!(config.steps, 100_000);
    assert_eq!(net.groups[0].size, 500);
    assert_eq!(net.generators[0].size, 40);

    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let t_a = run_network(&a);
    let t_b = run_network(&b);
    let first = std::fs::read(a.join("spikes.csv")).unwrap();
    let second = std::fs::read(b.join("spikes.csv")).unwrap();
    let lines = first.iter().filter(|&&c| c == b'\n').count() - 1;
    let late = String::from_utf8_lossy(&first)
        .lines()
        .skip(1)
        .filter(|l| l.split(',').next().unwrap().parse::<u64>().unwrap() >= 99_600)
        .count();
    let slowest = t_a.max(t_b);
    verdict(
        2,
        "network determinism",
        first == second && late > 0 && slowest < NETWORK_TIME_LIMIT,
        &format!(
            "{lines} spikes, {late} in the last 400 steps, identical={}, slowest run {:.1}s",
            first == second,
            slowest.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_3_weight_change_intervals() {
    let reports: Vec<_> = [SignMode::Excitatory, SignMode::Mixed]
        .into_iter()
        .flat_map(|mode| (1..=8).map(move |bits| weight_interval_experiment(bits, mode, 8000, SEED)))
        .collect();
    let failed = failures(&reports);
    verdict(
        3,
        "weight-change intervals",
        failed.is_empty(),
        &format!("16 formats x 8000 intervals, mean within 3%, chi2 p > 0.01; failures {failed:?}"),
    );
}

#[test]
fn criterion_4_trace_statistics() {
    let report = trace_experiment(&[4, 8, 16, 32], 400, SEED);
    let worst = report
        .metrics
        .iter()
        .filter(|m| m.name.contains("max_abs"))
        .map(|m| m.observed)
        .fold(0.0, f64::max);
    verdict(
        4,
        "trace statistics",
        report.passed,
        &format!("tau 4/8/16/32, 400 trials, worst |mean - recursion| {worst:.3} <= 2"),
    );
}

#[test]
fn criterion_5_stdp_window() {
    let rule = LearningRule::parse("2^-2*x1*y0 - 2^-2*x0*y1").unwrap();
    let window = stdp_window_experiment(&rule, 8, 400, SEED);
    let failed = failures(std::slice::from_ref(&window.report));
    verdict(
        5,
        "stdp window",
        window.report.passed,
        &format!("tau 8, |dt| 1..=16, 400 trials; failures {failed:?}"),
    );
}

#[test]
fn criterion_6_weight_codec() {
    let mut problems = Vec::new();
    for mode in SignMode::ALL {
        for bits in 1..=8 {
            let table = weight_table(mode, bits).unwrap();
            let clipped = table.iter().filter(|r| r.clipped).count();
            let expected_clips = usize::from(mode == SignMode::Mixed);
            if table.len() != 4096 {
                problems.push(format!("{mode}/{bits}: {} rows", table.len()));
            }
            if table
                .iter()
                .any(|r| r.actual_weight % 64 != 0 || r.actual_weight.abs() > WEIGHT_LIMIT)
            {
                problems.push(format!("{mode}/{bits}: weight off the 64 grid or over the limit"));
            }
            if clipped != expected_clips {
                problems.push(format!("{mode}/{bits}: {clipped} clipped rows"));
            }
            if mode == SignMode::Mixed && !table.iter().any(|r| r.clipped && r.mantissa == -256 && r.exponent == 7) {
                problems.push(format!("{mode}/{bits}: clip not at (-256, 7)"));
            }
        }
    }
    let cfg = WeightConfig::new(SignMode::Excitatory, 8).unwrap();
    let spots = [(254, 0, 16256), (128, -6, 128)];
    for (m, e, j) in spots {
        let got = encode_weight(m, e, &cfg).unwrap();
        if got != j {
            problems.push(format!("({m}, {e}) -> {got}, expected {j}"));
        }
    }
    verdict(
        6,
        "weight codec",
        problems.is_empty(),
        &format!("48 tables of 4096 rows, spot values (254,0)->16256 (128,-6)->128; problems {problems:?}"),
    );
}

#[test]
fn criterion_7_property_suites() {
    let mut problems = Vec::new();
    let n = 100_000;
    let mut rng = RandomStream::new(SEED);

    for (x, bits) in [(0.3, 0u32), (2.75, 0), (-7.125, 0), (37.5, 2), (-100.0, 3), (5.0, 4)] {
        let step = f64::from(1u32 << bits);
        let mean = (0..n).map(|_| stochastic_round(x, bits, &mut rng) as f64).sum::<f64>() / n as f64;
        let bound = 4.0 * step / (n as f64).sqrt();
        if (mean - x).abs() > bound {
            problems.push(format!("stochastic_round({x}, {bits}) mean {mean}"));
        }
    }

    for k in -20_000..=20_000 {
        let x = k as f64 * 0.037;
        if round_away_from_zero(-x) != -round_away_from_zero(x) {
            problems.push(format!("round_away_from_zero not odd at {x}"));
            break;
        }
    }

    let mut bound_violations = 0;
    for _ in 0..2000 {
        let tau = 1 + (rng.uniform() * 64.0) as u32;
        let impulse = (rng.uniform() * 128.0) as i64;
        let p = TraceParams::new(impulse, tau).unwrap();
        let rate = rng.uniform();
        let mut x = (rng.uniform() * 128.0) as i64;
        for _ in 0..200 {
            let spike = rng.bernoulli(rate);
            x = decay_and_impulse(x, &p, spike, &mut rng);
            if !(0..=TRACE_MAX).contains(&x) {
                bound_violations += 1;
            }
        }
    }
    if bound_violations > 0 {
        problems.push(format!("{bound_violations} trace bound violations"));
    }

    for accepted in ["2^-2*x1*y0 - 2^-2*x0*y1", "x1*y0 - y1*x0"] {
        if let Err(e) = LearningRule::parse(accepted) {
            problems.push(format!("rejected {accepted:?}: {e}"));
        }
    }
    for rejected in ["x1*z9", "u10*x0", "x1/y0", "r0*x1", "x1*y0 - t"] {
        if LearningRule::parse(rejected).is_ok() {
            problems.push(format!("accepted {rejected:?}"));
        }
    }

    verdict(
        7,
        "property suites",
        problems.is_empty(),
        &format!("rounding bias, oddness, trace bounds, rule parsing; problems {problems:?}"),
    );
}
