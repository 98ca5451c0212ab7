use loihi_core::engine::{
    ConnectionRow, Connectivity, GeneratorDef, GeneratorKind, MonitorDef, MonitorVariable, NetworkDef, NeuronGroupDef,
    PlasticityDef, Simulation, SynapseGroupDef,
};
use loihi_core::fixedpoint::{DecayFactor, RandomStream};
use loihi_core::neuron::{CompartmentParams, V_MANTISSA_MAX};
use loihi_core::plasticity::{decay_and_impulse, LearningRule, TraceParams};
use loihi_core::weights::{apply_weight_delta, SignMode, SynapticWeight, WeightConfig};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::report::{Metric, Table, ValidationReport};
use crate::scalar::{closed_form_current, scalar_algorithm1, ScalarParams};

/// Relative tolerance on the mean inter-change interval.
pub const INTERVAL_MEAN_TOLERANCE: f64 = 0.03;
/// Minimum chi-squared p-value for the geometric interval fit.
pub const INTERVAL_MIN_P_VALUE: f64 = 0.01;
/// Maximum |mean trace - recursion|, in trace units.
pub const TRACE_TOLERANCE: f64 = 2.0;
/// Allowed increase of mean |dw| between neighbouring |dt|.
pub const STDP_MONOTONE_SLACK: f64 = 0.1;
/// Allowed mean |dw| once the traces have decayed away.
pub const STDP_FAR_LIMIT: f64 = 0.5;
/// Float sanity bound, as a fraction of the peak current.
pub const FLOAT_TOLERANCE: f64 = 0.05;

const TRACE_IMPULSE: i64 = 120;
const TRACE_LONG_STEPS: usize = 10_000;

/// Sample inter-change intervals of a plastic mantissa driven by `dw = +1`
/// every step and compare them with a geometric law of mean `2^n_s`.
pub fn weight_interval_experiment(
    weight_bits: u32,
    sign_mode: SignMode,
    samples: usize,
    seed: u64,
) -> ValidationReport {
    let name = format!("weights_{sign_mode}_{weight_bits}");
    let mut report = ValidationReport::new(&name, seed);
    let config = match WeightConfig::new(sign_mode, weight_bits) {
        Ok(c) => c,
        Err(e) => {
            report.push(Metric::at_least(format!("invalid format: {e}"), 0.0, 1.0));
            return report;
        }
    };
    let mut rng = RandomStream::substream(seed, &name, "weights");
    let (low, high) = config.bounds();
    let fresh = |m| SynapticWeight::new(m, 0, true, &config).expect("bounds are encodable");
    let mut weight = fresh(low);
    let mut intervals = Vec::with_capacity(samples);
    let mut since = 0u64;
    while intervals.len() < samples {
        let before = weight.mantissa;
        apply_weight_delta(&mut weight, 1.0, &config, &mut rng).expect("weight is plastic");
        since += 1;
        if weight.mantissa != before {
            intervals.push(since);
            since = 0;
            if weight.mantissa == high {
                weight = fresh(low);
            }
        }
    }
    report.samples = intervals.len() as u64;

    let precision = config.precision() as f64;
    let mean = intervals.iter().sum::<u64>() as f64 / intervals.len() as f64;
    report.push(Metric::within(
        "mean_interval",
        mean,
        precision,
        INTERVAL_MEAN_TOLERANCE * precision,
    ));

    let p = 1.0 / precision;
    let (p_value, table) = geometric_fit(&intervals, p);
    report.push(Metric::at_least("chi2_p_value", p_value, INTERVAL_MIN_P_VALUE));
    report.tables.push(table);
    report
}

/// Chi-squared goodness of fit against `P(k) = p (1-p)^(k-1)`, `k >= 1`.
/// Tail bins are merged until every expected count is at least 5.
fn geometric_fit(intervals: &[u64], p: f64) -> (f64, Table) {
    let n = intervals.len() as f64;
    let mut table = Table::new("intervals", &["interval", "observed", "expected"]);
    let max = intervals.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![0u64; max + 1];
    for &k in intervals {
        counts[k as usize] += 1;
    }
    let expected = |k: usize| n * p * (1.0 - p).powi(k as i32 - 1);
    for (k, &c) in counts.iter().enumerate().skip(1) {
        table.rows.push(vec![k as f64, c as f64, expected(k)]);
    }
    if p >= 1.0 {
        // Every interval must be exactly one step.
        let ok = counts.len() == 2;
        return (if ok { 1.0 } else { 0.0 }, table);
    }

    // last bin collects k >= cut; its expectation is n (1-p)^(cut-1)
    let tail = |k: usize| n * (1.0 - p).powi(k as i32 - 1);
    let mut cut = 1;
    while tail(cut + 1) >= 5.0 && expected(cut) >= 5.0 {
        cut += 1;
    }
    let mut stat = 0.0;
    for k in 1..cut {
        let o = counts.get(k).copied().unwrap_or(0) as f64;
        stat += (o - expected(k)).powi(2) / expected(k);
    }
    let o_tail = counts.iter().skip(cut).sum::<u64>() as f64;
    stat += (o_tail - tail(cut)).powi(2) / tail(cut);
    let dof = (cut - 1) as f64;
    if dof < 1.0 {
        return (1.0, table);
    }
    let chi2 = ChiSquared::new(dof).expect("positive degrees of freedom");
    (1.0 - chi2.cdf(stat), table)
}

/// Mean of stochastically rounded traces against `m_t = m_{t-1} (1 - 1/tau)`.
///
/// The short run starts from a single impulse and is checked for
/// `t <= 5 tau`. The long run repeats the impulse every `5 tau` steps for
/// 10 000 steps to check that the mean does not drift.
pub fn trace_experiment(taus: &[u32], trials: usize, seed: u64) -> ValidationReport {
    let mut report = ValidationReport::new("traces", seed);
    report.samples = trials as u64;
    let mut table = Table::new("deviation", &["tau", "t", "mean", "recursion", "deviation"]);
    for &tau in taus {
        let params = match TraceParams::new(TRACE_IMPULSE, tau) {
            Ok(p) => p,
            Err(e) => {
                report.push(Metric::at_least(format!("tau{tau}: {e}"), 0.0, 1.0));
                continue;
            }
        };
        let mut rng = RandomStream::substream(seed, &format!("tau{tau}"), "traces");
        let period = 5 * tau as usize;
        let spike_at = |t: usize| t.is_multiple_of(period);

        let mut sums = vec![0i64; TRACE_LONG_STEPS];
        for _ in 0..trials {
            let mut x = 0;
            for (t, sum) in sums.iter_mut().enumerate() {
                x = decay_and_impulse(x, &params, spike_at(t), &mut rng);
                *sum += x;
            }
        }

        let alpha = params.alpha();
        let mut m = 0.0f64;
        let (mut short_dev, mut long_dev, mut signed) = (0.0f64, 0.0f64, 0.0);
        for (t, &sum) in sums.iter().enumerate() {
            m *= alpha;
            if spike_at(t) {
                m = (m + TRACE_IMPULSE as f64).min(127.0);
            }
            let mean = sum as f64 / trials as f64;
            let dev = mean - m;
            if t <= period {
                short_dev = short_dev.max(dev.abs());
                signed += dev;
                table.rows.push(vec![f64::from(tau), t as f64, mean, m, dev]);
            }
            long_dev = long_dev.max(dev.abs());
        }
        report.push(Metric::at_most(
            format!("tau{tau}_max_abs_deviation_5tau"),
            short_dev,
            TRACE_TOLERANCE,
        ));
        report.push(Metric::at_most(
            format!("tau{tau}_max_abs_deviation_long"),
            long_dev,
            TRACE_TOLERANCE,
        ));
        report.push(Metric::info(
            format!("tau{tau}_mean_signed_deviation"),
            signed / (period + 1) as f64,
        ));
    }
    report.tables.push(table);
    report
}

/// One measured pre/post pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StdpSample {
    /// Post arrival minus pre arrival at the synapse, in steps.
    pub delta_t: i64,
    pub dw: i64,
}

#[derive(Debug, Clone)]
pub struct StdpWindow {
    pub report: ValidationReport,
    pub samples: Vec<StdpSample>,
}

const STDP_MANTISSA: i64 = 128;
const STDP_EXPONENT: i32 = -6;

fn stdp_network(rule: &LearningRule, tau: u32, delta_t: i64, seed: u64) -> (NetworkDef, u64) {
    // Post spikes at step s reach the synapse at s + 1.
    let base = 2i64;
    let pre = base + (-delta_t).max(0);
    let post = pre + delta_t - 1;
    let steps = (pre.max(post + 1) + 3) as u64;
    let trace = Some(TraceParams::new(TRACE_IMPULSE, tau).expect("valid trace parameters"));
    let row = |mantissa, exponent| ConnectionRow {
        src: 0,
        dst: 0,
        mantissa,
        exponent,
        delay: 0,
    };
    let generator = |name: &str, step: i64| GeneratorDef {
        name: name.into(),
        size: 1,
        kind: GeneratorKind::Explicit {
            spikes: vec![(0, step as u64)],
        },
    };
    let def = NetworkDef {
        seed,
        groups: vec![NeuronGroupDef {
            name: "post".into(),
            size: 1,
            params: CompartmentParams {
                delta_i: DecayFactor::FULL,
                delta_v: DecayFactor::FULL,
                v_mantissa: 100,
                bias: 0,
                refractory: 0,
            },
        }],
        generators: vec![generator("pre", pre), generator("drive", post)],
        synapses: vec![
            SynapseGroupDef {
                name: "plastic".into(),
                source: "pre".into(),
                target: "post".into(),
                sign_mode: SignMode::Excitatory,
                weight_bits: 8,
                connections: Connectivity::List {
                    rows: vec![row(STDP_MANTISSA, STDP_EXPONENT)],
                },
                plastic: true,
                plasticity: Some(PlasticityDef {
                    rule: Some(rule.to_string()),
                    x1: trace,
                    x2: trace,
                    y1: trace,
                    y2: trace,
                    y3: trace,
                }),
            },
            SynapseGroupDef {
                name: "drive_post".into(),
                source: "drive".into(),
                target: "post".into(),
                sign_mode: SignMode::Excitatory,
                weight_bits: 8,
                connections: Connectivity::List {
                    rows: vec![row(254, 0)],
                },
                plastic: false,
                plasticity: None,
            },
        ],
        monitors: vec![],
    };
    (def, steps)
}

/// Isolated pre/post pairs through the engine for every `delta_t`, with
/// `trials` repetitions each. Pass criteria: every pre-before-post pair
/// potentiates and every post-before-pre pair depresses for
/// `1 <= |dt| <= 2 tau`, mean |dw| does not grow with |dt| beyond
/// [`STDP_MONOTONE_SLACK`], and it vanishes at `|dt| = 10 tau`.
pub fn stdp_window_experiment(rule: &LearningRule, tau: u32, trials: usize, seed: u64) -> StdpWindow {
    let mut report = ValidationReport::new("stdp", seed);
    report.samples = trials as u64;
    let window = 2 * i64::from(tau);
    let far = 10 * i64::from(tau);
    let mut deltas: Vec<i64> = (-window..=window).collect();
    deltas.extend([-far, far]);
    let mut seeds = RandomStream::substream(seed, "stdp", "trials");

    let mut samples = Vec::with_capacity(deltas.len() * trials);
    let mut table = Table::new("window", &["delta_t", "mean_dw", "mean_abs_dw", "sign_fraction"]);
    let mut mean_abs = std::collections::BTreeMap::new();
    let (mut pos_ok, mut pos_n, mut neg_ok, mut neg_n) = (0usize, 0usize, 0usize, 0usize);
    for &dt in &deltas {
        let (mut sum, mut sum_abs, mut agree) = (0i64, 0i64, 0usize);
        for _ in 0..trials {
            let (def, steps) = stdp_network(rule, tau, dt, seeds.next_seed());
            let mut sim = Simulation::build(&def).expect("stdp network is valid");
            sim.run(steps).expect("stdp network stays in range");
            let dw = sim.synapse_weights("plastic").expect("plastic group exists")[0].mantissa - STDP_MANTISSA;
            samples.push(StdpSample { delta_t: dt, dw });
            sum += dw;
            sum_abs += dw.abs();
            if (dt > 0 && dw > 0) || (dt < 0 && dw < 0) {
                agree += 1;
            }
        }
        if (1..=window).contains(&dt) {
            pos_ok += agree;
            pos_n += trials;
        } else if (-window..=-1).contains(&dt) {
            neg_ok += agree;
            neg_n += trials;
        }
        let n = trials as f64;
        mean_abs.insert(dt, sum_abs as f64 / n);
        table
            .rows
            .push(vec![dt as f64, sum as f64 / n, sum_abs as f64 / n, agree as f64 / n]);
    }
    report.push(Metric::at_least(
        "potentiation_fraction",
        pos_ok as f64 / pos_n as f64,
        1.0,
    ));
    report.push(Metric::at_least(
        "depression_fraction",
        neg_ok as f64 / neg_n as f64,
        1.0,
    ));
    for (label, sign) in [("pre_before_post", 1), ("post_before_pre", -1)] {
        let worst = (1..window)
            .map(|k| mean_abs[&(sign * (k + 1))] - mean_abs[&(sign * k)])
            .fold(f64::NEG_INFINITY, f64::max);
        report.push(Metric::at_most(
            format!("{label}_max_increase"),
            worst,
            STDP_MONOTONE_SLACK,
        ));
    }
    let far_abs = (mean_abs[&far] + mean_abs[&-far]) / 2.0;
    report.push(Metric::at_most("far_mean_abs_dw", far_abs, STDP_FAR_LIMIT));
    report.tables.push(table);
    StdpWindow { report, samples }
}

/// A random single-unit instance for the engine/oracle comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitInstance {
    pub sign_mode: SignMode,
    pub weight_bits: u32,
    pub params: ScalarParams,
    pub input_rate: f64,
}

fn pick(rng: &mut RandomStream, low: i64, high: i64) -> i64 {
    low + (rng.uniform() * (high - low + 1) as f64) as i64
}

impl UnitInstance {
    pub fn random(rng: &mut RandomStream) -> Self {
        let decay = |rng: &mut RandomStream| match pick(rng, 0, 9) {
            0 => 0,
            1 => 4096,
            2 => 1 << pick(rng, 0, 12),
            _ => pick(rng, 0, 4096),
        };
        let sign_mode = SignMode::ALL[pick(rng, 0, 2) as usize];
        let weight_bits = pick(rng, 1, 8) as u32;
        let (low, high) = sign_mode.mantissa_range();
        let config = WeightConfig::new(sign_mode, weight_bits).expect("bits in range");
        let delta_i = decay(rng);
        let delta_v = decay(rng);
        let magnitude = pick(rng, 0, 17);
        let v_mantissa = pick(rng, 0, (1 << magnitude) - 1).min(V_MANTISSA_MAX);
        let bias = if rng.bernoulli(0.5) { 0 } else { pick(rng, -4096, 4096) };
        let refractory = if rng.bernoulli(0.5) { 0 } else { pick(rng, 1, 8) as u32 };
        let mantissa = pick(rng, low, high);
        let exponent = pick(rng, -8, 7) as i32;
        let input_rate = if rng.bernoulli(0.1) { 0.0 } else { rng.uniform() * 0.5 };
        UnitInstance {
            sign_mode,
            weight_bits,
            params: ScalarParams {
                delta_i,
                delta_v,
                v_mantissa,
                bias,
                refractory,
                mantissa,
                exponent,
                precision_exponent: config.precision_exponent(),
            },
            input_rate,
        }
    }

    pub fn network(&self, input: &[bool]) -> NetworkDef {
        let p = &self.params;
        let spikes = input
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(t, _)| (0, t as u64))
            .collect();
        let monitor = |name: &str, variable| MonitorDef {
            name: name.into(),
            source: "unit".into(),
            variable,
            ids: None,
        };
        NetworkDef {
            seed: 0,
            groups: vec![NeuronGroupDef {
                name: "unit".into(),
                size: 1,
                params: CompartmentParams {
                    delta_i: DecayFactor::new(p.delta_i).expect("decay in range"),
                    delta_v: DecayFactor::new(p.delta_v).expect("decay in range"),
                    v_mantissa: p.v_mantissa,
                    bias: p.bias,
                    refractory: p.refractory,
                },
            }],
            generators: vec![GeneratorDef {
                name: "input".into(),
                size: 1,
                kind: GeneratorKind::Explicit { spikes },
            }],
            synapses: vec![SynapseGroupDef {
                name: "in".into(),
                source: "input".into(),
                target: "unit".into(),
                sign_mode: self.sign_mode,
                weight_bits: self.weight_bits,
                connections: Connectivity::List {
                    rows: vec![ConnectionRow {
                        src: 0,
                        dst: 0,
                        mantissa: p.mantissa,
                        exponent: p.exponent,
                        delay: 0,
                    }],
                },
                plastic: false,
                plasticity: None,
            }],
            monitors: vec![
                monitor("I", MonitorVariable::Current),
                monitor("v", MonitorVariable::Voltage),
                monitor("spikes", MonitorVariable::Spikes),
            ],
        }
    }
}

/// Count of positions where the engine and the scalar reference disagree.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Mismatches {
    pub current: usize,
    pub voltage: usize,
    pub spikes: usize,
}

impl Mismatches {
    pub fn total(&self) -> usize {
        self.current + self.voltage + self.spikes
    }
}

pub fn compare_instance(instance: &UnitInstance, input: &[bool]) -> Mismatches {
    let expected = scalar_algorithm1(&instance.params, input);
    let mut sim = Simulation::build(&instance.network(input)).expect("random instance is valid");
    sim.run(input.len() as u64).expect("random instance stays in range");
    let current = sim.record("I").expect("monitor").series(0);
    let voltage = sim.record("v").expect("monitor").series(0);
    let mut spiked = vec![false; input.len()];
    for (step, _) in sim.record("spikes").expect("monitor").spikes() {
        spiked[step as usize] = true;
    }
    let diff = |a: &[i64], b: &[i64]| a.len().abs_diff(b.len()) + a.iter().zip(b).filter(|(x, y)| x != y).count();
    Mismatches {
        current: diff(&current, &expected.current),
        voltage: diff(&voltage, &expected.voltage),
        spikes: spiked.iter().zip(&expected.spikes).filter(|(x, y)| x != y).count(),
    }
}

/// Engine against the scalar reference on `instances` random single-unit
/// configurations with random input spikes. Passes only at zero mismatches.
pub fn equivalence_experiment(instances: usize, steps: usize, seed: u64) -> ValidationReport {
    let mut report = ValidationReport::new("oracle", seed);
    report.samples = (instances * steps) as u64;
    let mut rng = RandomStream::substream(seed, "oracle", "instances");
    let mut total = Mismatches::default();
    let mut spikes = 0usize;
    let mut table = Table::new(
        "instances",
        &["instance", "delta_i", "delta_v", "v_mantissa", "mismatches"],
    );
    for k in 0..instances {
        let instance = UnitInstance::random(&mut rng);
        let input: Vec<bool> = (0..steps).map(|_| rng.bernoulli(instance.input_rate)).collect();
        let m = compare_instance(&instance, &input);
        spikes += scalar_algorithm1(&instance.params, &input)
            .spikes
            .iter()
            .filter(|&&s| s)
            .count();
        total.current += m.current;
        total.voltage += m.voltage;
        total.spikes += m.spikes;
        let p = &instance.params;
        table.rows.push(vec![
            k as f64,
            p.delta_i as f64,
            p.delta_v as f64,
            p.v_mantissa as f64,
            m.total() as f64,
        ]);
    }
    report.push(Metric::at_most("current_mismatches", total.current as f64, 0.0));
    report.push(Metric::at_most("voltage_mismatches", total.voltage as f64, 0.0));
    report.push(Metric::at_most("spike_mismatches", total.spikes as f64, 0.0));
    report.push(Metric::info("output_spikes", spikes as f64));
    report.tables.push(table);
    report
}

/// Integer current against the exponential closed form for large weights.
/// The error is measured relative to the peak current of the run.
pub fn float_sanity_experiment(taus: &[u32], seed: u64) -> ValidationReport {
    let mut report = ValidationReport::new("float_sanity", seed);
    let spike_steps = [0u64, 37, 90, 95];
    let steps = 300usize;
    let (mantissa, exponent) = (254, 7);
    let weight = crate::scalar::scalar_weight(mantissa, exponent, 0) as f64;
    let mut table = Table::new("current", &["tau", "t", "integer", "closed_form"]);
    for &tau in taus {
        let delta = (4096 / tau.max(1)) as i64;
        let params = ScalarParams {
            delta_i: delta,
            delta_v: 4096,
            v_mantissa: V_MANTISSA_MAX,
            bias: 0,
            refractory: 0,
            mantissa,
            exponent,
            precision_exponent: 0,
        };
        let instance = UnitInstance {
            sign_mode: SignMode::Excitatory,
            weight_bits: 8,
            params,
            input_rate: 0.0,
        };
        let mut input = vec![false; steps];
        for &s in &spike_steps {
            input[s as usize] = true;
        }
        let mut sim = Simulation::build(&instance.network(&input)).expect("valid network");
        sim.run(steps as u64).expect("in range");
        let current = sim.record("I").expect("monitor").series(0);
        let tau_f = 4096.0 / delta as f64;
        let times: Vec<f64> = spike_steps.iter().map(|&s| s as f64).collect();
        let closed: Vec<f64> = (0..steps)
            .map(|t| closed_form_current(&times, weight, tau_f, t as f64))
            .collect();
        let peak = closed.iter().cloned().fold(0.0, f64::max);
        let worst = current
            .iter()
            .zip(&closed)
            .map(|(&i, &c)| (i as f64 - c).abs() / peak)
            .fold(0.0, f64::max);
        for (t, (&i, &c)) in current.iter().zip(&closed).enumerate() {
            table.rows.push(vec![f64::from(tau), t as f64, i as f64, c]);
        }
        report.push(Metric::at_most(
            format!("tau{tau}_max_relative_error"),
            worst,
            FLOAT_TOLERANCE,
        ));
    }
    report.samples = (taus.len() * steps) as u64;
    report.tables.push(table);
    report
}

trait NextSeed {
    fn next_seed(&mut self) -> u64;
}

impl NextSeed for RandomStream {
    fn next_seed(&mut self) -> u64 {
        rand_core::RngCore::next_u64(self)
    }
}
