use loihi_core::fixedpoint::RandomStream;
use loihi_core::plasticity::LearningRule;
use loihi_core::weights::SignMode;
use loihi_oracle::{
    compare_instance, equivalence_experiment, float_sanity_experiment, stdp_window_experiment, trace_experiment,
    weight_interval_experiment, ValidationReport,
};

fn show(report: &ValidationReport) {
    for m in &report.metrics {
        println!(
            "{} {} observed={} expected={} tol={} {}",
            report.experiment,
            m.name,
            m.observed,
            m.expected,
            m.tolerance,
            if m.passed { "ok" } else { "FAIL" }
        );
    }
}

#[test]
fn weight_interval_examples() {
    for (bits, mode, mean) in [
        (8, SignMode::Excitatory, 1.0),
        (6, SignMode::Excitatory, 4.0),
        (8, SignMode::Mixed, 2.0),
    ] {
        let r = weight_interval_experiment(bits, mode, 8000, 11);
        show(&r);
        assert!(r.passed);
        assert_eq!(r.metrics[0].expected, mean);
    }
}

#[test]
fn weight_intervals_are_deterministic() {
    let a = weight_interval_experiment(3, SignMode::Mixed, 2000, 5);
    let b = weight_interval_experiment(3, SignMode::Mixed, 2000, 5);
    assert_eq!(a, b);
}

#[test]
fn trace_means_follow_the_recursion() {
    let r = trace_experiment(&[4, 8, 16, 32], 400, 21);
    show(&r);
    assert!(r.passed);
    let rows = &r.tables[0].rows;
    // tau 8, t 1: 120 * 7/8 = 105 exactly in every trial
    let row = rows.iter().find(|row| row[0] == 8.0 && row[1] == 1.0).unwrap();
    assert_eq!(row[2], 105.0);
}

#[test]
fn zero_impulse_trace_is_zero() {
    use loihi_core::plasticity::{decay_and_impulse, TraceParams};
    let p = TraceParams::new(0, 8).unwrap();
    let mut rng = RandomStream::new(0);
    let mut x = 0;
    for _ in 0..1000 {
        x = decay_and_impulse(x, &p, true, &mut rng);
        assert_eq!(x, 0);
    }
}

#[test]
fn stdp_window_shape() {
    let rule = LearningRule::parse("2^-2*x1*y0 - 2^-2*y1*x0").unwrap();
    let w = stdp_window_experiment(&rule, 8, 100, 2);
    show(&w.report);
    assert!(w.report.passed);
    let first = |dt| w.samples.iter().find(|s| s.delta_t == dt).unwrap().dw;
    assert!(first(1) > 0);
    assert!(first(-1) < 0);
    assert_eq!(first(80), 0);
}

#[test]
fn engine_matches_scalar_reference_on_small_batch() {
    let r = equivalence_experiment(20, 5000, 99);
    show(&r);
    assert!(r.passed);
    assert!(r.metrics[3].observed > 0.0, "instances should produce spikes");
}

#[test]
fn handpicked_instances_match() {
    let mut rng = RandomStream::new(4);
    let mut inst = loihi_oracle::UnitInstance::random(&mut rng);
    inst.sign_mode = SignMode::Mixed;
    inst.weight_bits = 8;
    inst.params.precision_exponent = 1;
    inst.params.mantissa = -256;
    inst.params.exponent = 7;
    inst.params.delta_i = 0;
    inst.params.delta_v = 0;
    let input: Vec<bool> = (0..3000).map(|t| t % 7 == 0).collect();
    assert_eq!(compare_instance(&inst, &input).total(), 0);
}

#[test]
fn float_sanity() {
    let r = float_sanity_experiment(&[16, 32, 64], 0);
    show(&r);
    assert!(r.passed);
}

mod codec_agreement {
    use loihi_core::weights::{encode_weight, SignMode, WeightConfig};
    use loihi_oracle::scalar_weight;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn scalar_weight_matches_core(mode in 0usize..3, bits in 1u32..=8, raw in 0i64..=255, exponent in -8i32..=7) {
            let mode = SignMode::ALL[mode];
            let (low, _) = mode.mantissa_range();
            let mantissa = low + raw * if mode == SignMode::Mixed { 2 } else { 1 };
            let cfg = WeightConfig::new(mode, bits).unwrap();
            let core = encode_weight(mantissa, exponent, &cfg).unwrap();
            prop_assert_eq!(core, scalar_weight(mantissa, exponent, cfg.precision_exponent()));
        }
    }
}
