//! The clock-driven simulator.
//!
//! Each step runs six phases in a fixed order:
//!
//! | phase        | work                                                                 |
//! |--------------|----------------------------------------------------------------------|
//! | `start`      | generators emit this step's spikes                                   |
//! | `synapses`   | arriving spikes are summed into targets, synaptic input is updated, traces decay and plastic weights update |
//! | `groups`     | voltages decay and integrate (clamped while refractory)              |
//! | `thresholds` | units whose voltage exceeds threshold spike                          |
//! | `resets`     | spiking units reset and arm their refractory counter; outgoing spikes are queued |
//! | `end`        | voltage, weight and spike probes                                     |
//!
//! Timing follows from the order: a generator spike at step `t` reaches its
//! targets at `t + delay`, a neuron spike at `t` at `t + 1 + delay`. The
//! post-synaptic spike indicator seen by a learning rule at `t` is the
//! target's spike from step `t - 1`, the same latency as current injection.

use thiserror::Error;

use crate::fixedpoint::{ArithmeticError, RandomStream};
use crate::neuron::{reset, update_current, update_voltage, CompartmentParams, CompartmentState};
use crate::plasticity::{decay_and_impulse, LearningRule, RuleEnv, TraceParams, TraceState};
use crate::weights::{apply_weight_delta, SynapticWeight, WeightConfig};

use super::def::{ConnectionRow, Connectivity, GeneratorKind, MonitorVariable, NetworkDef, Phase, ValidationError};
use super::monitor::{MonitorRecord, MonitorSource};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("{source} in '{entity}' unit {unit} at step {step}")]
    Overflow {
        entity: String,
        unit: u32,
        step: u64,
        #[source]
        source: ArithmeticError,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("spike rate {0} outside [0, 1]")]
pub struct RateError(pub f64);

/// One Bernoulli draw: a generator with `rate` spikes with that probability
/// on every step, independently.
pub fn bernoulli_generator(rate: f64, rng: &mut RandomStream) -> Result<bool, RateError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(RateError(rate));
    }
    Ok(rng.bernoulli(rate))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceRef {
    Group(usize),
    Generator(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpikeEvent {
    pub source: SourceRef,
    pub id: u32,
}

struct GroupRt {
    name: String,
    params: CompartmentParams,
    state: Vec<CompartmentState>,
    input: Vec<i64>,
    /// Spikes of the most recent thresholds phase.
    spiked: Vec<bool>,
    spiked_ids: Vec<u32>,
}

enum GeneratorRt {
    Explicit { spikes: Vec<(u64, u32)>, cursor: usize },
    Bernoulli { rate: f64, rng: RandomStream },
}

struct GeneratorGroupRt {
    name: String,
    size: u32,
    kind: GeneratorRt,
    spiked_ids: Vec<u32>,
}

#[derive(Debug, Clone, Copy)]
struct Conn {
    src: u32,
    dst: u32,
    delay: u32,
}

struct PlasticRt {
    rule: LearningRule,
    x1: Option<TraceParams>,
    x2: Option<TraceParams>,
    y1: Option<TraceParams>,
    y2: Option<TraceParams>,
    y3: Option<TraceParams>,
    traces: Vec<TraceState>,
    arrived: Vec<bool>,
    trace_rng: RandomStream,
    weight_rng: RandomStream,
}

struct SynapseRt {
    name: String,
    source: SourceRef,
    target: usize,
    config: WeightConfig,
    conns: Vec<Conn>,
    weights: Vec<SynapticWeight>,
    /// Outgoing connections per source unit (CSR layout).
    out_offsets: Vec<usize>,
    out_conns: Vec<u32>,
    /// Connections whose spike arrives at step `s`, at slot `s % len`.
    pending: Vec<Vec<u32>>,
    plastic: Option<PlasticRt>,
}

impl SynapseRt {
    fn schedule(&mut self, unit: u32, arrival_base: u64) {
        let len = self.pending.len() as u64;
        let (a, b) = (self.out_offsets[unit as usize], self.out_offsets[unit as usize + 1]);
        for &c in &self.out_conns[a..b] {
            let slot = ((arrival_base + u64::from(self.conns[c as usize].delay)) % len) as usize;
            self.pending[slot].push(c);
        }
    }
}

struct MonitorRt {
    target: MonitorSource,
    variable: MonitorVariable,
    /// `mask[i]` is set for monitored ids (spike monitors only).
    mask: Vec<bool>,
    ids: Vec<u32>,
}

/// A built network and its evolving state.
pub struct Simulation {
    t: u64,
    groups: Vec<GroupRt>,
    generators: Vec<GeneratorGroupRt>,
    synapses: Vec<SynapseRt>,
    monitors: Vec<MonitorRt>,
    records: Vec<MonitorRecord>,
    events: Vec<SpikeEvent>,
}

fn trace_step(trace: &mut i64, params: &Option<TraceParams>, spiked: bool, rng: &mut RandomStream) {
    if let Some(p) = params {
        *trace = decay_and_impulse(*trace, p, spiked, rng);
    }
}

impl Simulation {
    /// Validate and compile a definition. All state starts at zero; random
    /// streams derive from the definition's seed.
    pub fn build(def: &NetworkDef) -> Result<Simulation, ValidationError> {
        def.validate()?;
        let seed = def.seed;
        let groups: Vec<GroupRt> = def
            .groups
            .iter()
            .map(|g| GroupRt {
                name: g.name.clone(),
                params: g.params,
                state: vec![CompartmentState::default(); g.size as usize],
                input: vec![0; g.size as usize],
                spiked: vec![false; g.size as usize],
                spiked_ids: Vec::new(),
            })
            .collect();
        let generators: Vec<GeneratorGroupRt> = def
            .generators
            .iter()
            .map(|g| {
                let kind = match &g.kind {
                    GeneratorKind::Explicit { spikes } => {
                        let mut s: Vec<(u64, u32)> = spikes.iter().map(|&(id, step)| (step, id)).collect();
                        s.sort_unstable();
                        s.dedup();
                        GeneratorRt::Explicit { spikes: s, cursor: 0 }
                    }
                    GeneratorKind::Bernoulli { rate } => GeneratorRt::Bernoulli {
                        rate: *rate,
                        rng: RandomStream::substream(seed, &g.name, "spikes"),
                    },
                };
                GeneratorGroupRt {
                    name: g.name.clone(),
                    size: g.size,
                    kind,
                    spiked_ids: Vec::new(),
                }
            })
            .collect();

        let resolve = |name: &str| -> SourceRef {
            match groups.iter().position(|g| g.name == name) {
                Some(i) => SourceRef::Group(i),
                None => SourceRef::Generator(generators.iter().position(|g| g.name == name).expect("validated")),
            }
        };

        let mut issues = Vec::new();
        let mut synapses = Vec::with_capacity(def.synapses.len());
        for s in &def.synapses {
            let source = resolve(&s.source);
            let target = groups.iter().position(|g| g.name == s.target).expect("validated");
            let source_size = def.source_size(&s.source).expect("validated");
            let target_size = def.group_size(&s.target).expect("validated");
            let config = WeightConfig::new(s.sign_mode, s.weight_bits).expect("validated");
            let rows: Vec<ConnectionRow> = match &s.connections {
                Connectivity::List { rows } => rows.clone(),
                Connectivity::Random(r) => {
                    let mut rng = RandomStream::substream(seed, &s.name, "connectivity");
                    r.generate(s.sign_mode, s.source == s.target, source_size, target_size, &mut rng)
                }
                Connectivity::Csv { .. } => unreachable!("rejected by validation"),
            };
            let weights: Vec<SynapticWeight> = rows
                .iter()
                .map(|r| SynapticWeight::new(r.mantissa, r.exponent, s.plastic, &config).expect("validated"))
                .collect();
            let conns: Vec<Conn> = rows
                .iter()
                .map(|r| Conn {
                    src: r.src,
                    dst: r.dst,
                    delay: r.delay,
                })
                .collect();

            let mut counts = vec![0usize; source_size as usize + 1];
            for c in &conns {
                counts[c.src as usize + 1] += 1;
            }
            for i in 1..counts.len() {
                counts[i] += counts[i - 1];
            }
            let out_offsets = counts.clone();
            let mut fill = counts;
            let mut out_conns = vec![0u32; conns.len()];
            for (i, c) in conns.iter().enumerate() {
                out_conns[fill[c.src as usize]] = i as u32;
                fill[c.src as usize] += 1;
            }
            let max_delay = conns.iter().map(|c| c.delay).max().unwrap_or(0);
            let pending = vec![Vec::new(); max_delay as usize + 2];

            let plastic = if s.plastic {
                let p = s.plasticity.as_ref().expect("validated");
                Some(PlasticRt {
                    rule: LearningRule::parse(p.rule.as_deref().unwrap_or_default()).expect("validated"),
                    x1: p.x1,
                    x2: p.x2,
                    y1: p.y1,
                    y2: p.y2,
                    y3: p.y3,
                    traces: vec![TraceState::default(); conns.len()],
                    arrived: vec![false; conns.len()],
                    trace_rng: RandomStream::substream(seed, &s.name, "traces"),
                    weight_rng: RandomStream::substream(seed, &s.name, "weights"),
                })
            } else {
                None
            };

            synapses.push(SynapseRt {
                name: s.name.clone(),
                source,
                target,
                config,
                conns,
                weights,
                out_offsets,
                out_conns,
                pending,
                plastic,
            });
        }

        let mut monitors = Vec::with_capacity(def.monitors.len());
        let mut records = Vec::with_capacity(def.monitors.len());
        for m in &def.monitors {
            let (target, size) = if let Some(i) = groups.iter().position(|g| g.name == m.source) {
                (MonitorSource::Group(i), groups[i].state.len())
            } else if let Some(i) = generators.iter().position(|g| g.name == m.source) {
                (MonitorSource::Generator(i), generators[i].size as usize)
            } else {
                let i = synapses.iter().position(|s| s.name == m.source).expect("validated");
                (MonitorSource::Synapses(i), synapses[i].conns.len())
            };
            let ids: Vec<u32> = match &m.ids {
                Some(ids) => ids.clone(),
                None => (0..size as u32).collect(),
            };
            if let Some(bad) = ids.iter().find(|&&id| id as usize >= size) {
                issues.push(format!("monitor '{}': id {bad} out of range (size {size})", m.name));
                continue;
            }
            let mut mask = vec![false; size];
            for &id in &ids {
                mask[id as usize] = true;
            }
            monitors.push(MonitorRt {
                target,
                variable: m.variable,
                mask,
                ids,
            });
            records.push(MonitorRecord::new(m.name.clone(), m.source.clone(), m.variable));
        }
        if !issues.is_empty() {
            return Err(ValidationError { issues });
        }

        Ok(Simulation {
            t: 0,
            groups,
            generators,
            synapses,
            monitors,
            records,
            events: Vec::new(),
        })
    }

    /// Index of the next step to execute.
    pub fn current_step(&self) -> u64 {
        self.t
    }

    /// Execute one step and return the spikes it produced (generators first,
    /// then neuron groups).
    pub fn step(&mut self) -> Result<&[SpikeEvent], EngineError> {
        self.events.clear();
        self.phase_start();
        self.phase_synapses()?;
        self.sample(Phase::Synapses);
        self.phase_groups()?;
        self.phase_thresholds();
        self.phase_resets();
        self.sample(Phase::End);
        self.t += 1;
        Ok(&self.events)
    }

    pub fn run(&mut self, steps: u64) -> Result<&[MonitorRecord], EngineError> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(&self.records)
    }

    pub fn records(&self) -> &[MonitorRecord] {
        &self.records
    }

    pub fn record(&self, name: &str) -> Option<&MonitorRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn group_state(&self, name: &str) -> Option<&[CompartmentState]> {
        self.groups.iter().find(|g| g.name == name).map(|g| g.state.as_slice())
    }

    pub fn synapse_weights(&self, name: &str) -> Option<&[SynapticWeight]> {
        self.synapses
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.weights.as_slice())
    }

    /// `(src, dst)` of every connection of a synapse group, in index order.
    pub fn synapse_endpoints(&self, name: &str) -> Option<Vec<(u32, u32)>> {
        self.synapses
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.conns.iter().map(|c| (c.src, c.dst)).collect())
    }

    pub fn group_name(&self, source: SourceRef) -> &str {
        match source {
            SourceRef::Group(i) => &self.groups[i].name,
            SourceRef::Generator(i) => &self.generators[i].name,
        }
    }

    fn phase_start(&mut self) {
        let t = self.t;
        for (gi, g) in self.generators.iter_mut().enumerate() {
            g.spiked_ids.clear();
            match &mut g.kind {
                GeneratorRt::Explicit { spikes, cursor } => {
                    while *cursor < spikes.len() && spikes[*cursor].0 < t {
                        *cursor += 1;
                    }
                    while *cursor < spikes.len() && spikes[*cursor].0 == t {
                        g.spiked_ids.push(spikes[*cursor].1);
                        *cursor += 1;
                    }
                }
                GeneratorRt::Bernoulli { rate, rng } => {
                    for id in 0..g.size {
                        if rng.bernoulli(*rate) {
                            g.spiked_ids.push(id);
                        }
                    }
                }
            }
            for s in self
                .synapses
                .iter_mut()
                .filter(|s| s.source == SourceRef::Generator(gi))
            {
                for &id in &g.spiked_ids {
                    s.schedule(id, t);
                }
            }
            self.events.extend(g.spiked_ids.iter().map(|&id| SpikeEvent {
                source: SourceRef::Generator(gi),
                id,
            }));
        }
    }

    fn phase_synapses(&mut self) -> Result<(), EngineError> {
        let t = self.t;
        let groups = &mut self.groups;
        for s in &mut self.synapses {
            let slot = (t % s.pending.len() as u64) as usize;
            let arrived = std::mem::take(&mut s.pending[slot]);
            let target = &mut groups[s.target];
            for &c in &arrived {
                let conn = s.conns[c as usize];
                let input = &mut target.input[conn.dst as usize];
                *input = input
                    .checked_add(s.weights[c as usize].actual)
                    .ok_or_else(|| EngineError::Overflow {
                        entity: target.name.clone(),
                        unit: conn.dst,
                        step: t,
                        source: ArithmeticError::Overflow("synaptic accumulation"),
                    })?;
            }
            if let Some(p) = &mut s.plastic {
                for &c in &arrived {
                    p.arrived[c as usize] = true;
                }
                for (c, conn) in s.conns.iter().enumerate() {
                    let x0 = p.arrived[c];
                    let y0 = target.spiked[conn.dst as usize];
                    let tr = &mut p.traces[c];
                    trace_step(&mut tr.x1, &p.x1, x0, &mut p.trace_rng);
                    trace_step(&mut tr.x2, &p.x2, x0, &mut p.trace_rng);
                    trace_step(&mut tr.y1, &p.y1, y0, &mut p.trace_rng);
                    trace_step(&mut tr.y2, &p.y2, y0, &mut p.trace_rng);
                    trace_step(&mut tr.y3, &p.y3, y0, &mut p.trace_rng);
                    let weight = &mut s.weights[c];
                    let env = RuleEnv {
                        x0,
                        y0,
                        x1: tr.x1,
                        x2: tr.x2,
                        y1: tr.y1,
                        y2: tr.y2,
                        y3: tr.y3,
                        w: weight.mantissa,
                        t,
                    };
                    let dw = p.rule.eval(&env);
                    apply_weight_delta(weight, dw, &s.config, &mut p.weight_rng).expect("plastic weight");
                    p.arrived[c] = false;
                }
            }
            let mut arrived = arrived;
            arrived.clear();
            s.pending[slot] = arrived;
        }
        for g in groups.iter_mut() {
            for (i, (state, input)) in g.state.iter_mut().zip(g.input.iter_mut()).enumerate() {
                update_current(state, &g.params, *input).map_err(|source| EngineError::Overflow {
                    entity: g.name.clone(),
                    unit: i as u32,
                    step: t,
                    source,
                })?;
                *input = 0;
            }
        }
        Ok(())
    }

    fn phase_groups(&mut self) -> Result<(), EngineError> {
        let t = self.t;
        for g in &mut self.groups {
            for (i, state) in g.state.iter_mut().enumerate() {
                update_voltage(state, &g.params).map_err(|source| EngineError::Overflow {
                    entity: g.name.clone(),
                    unit: i as u32,
                    step: t,
                    source,
                })?;
            }
        }
        Ok(())
    }

    fn phase_thresholds(&mut self) {
        for g in &mut self.groups {
            let threshold = g.params.threshold();
            g.spiked_ids.clear();
            for (i, (state, spiked)) in g.state.iter().zip(g.spiked.iter_mut()).enumerate() {
                *spiked = state.voltage > threshold;
                if *spiked {
                    g.spiked_ids.push(i as u32);
                }
            }
        }
    }

    fn phase_resets(&mut self) {
        let t = self.t;
        for (gi, g) in self.groups.iter_mut().enumerate() {
            for &id in &g.spiked_ids {
                reset(&mut g.state[id as usize], &g.params);
            }
            for s in self.synapses.iter_mut().filter(|s| s.source == SourceRef::Group(gi)) {
                for &id in &g.spiked_ids {
                    s.schedule(id, t + 1);
                }
            }
            self.events.extend(g.spiked_ids.iter().map(|&id| SpikeEvent {
                source: SourceRef::Group(gi),
                id,
            }));
        }
    }

    fn sample(&mut self, phase: Phase) {
        let t = self.t;
        for (m, record) in self.monitors.iter().zip(self.records.iter_mut()) {
            let var = m.variable;
            if var.phase() != phase {
                continue;
            }
            match (m.target, var) {
                (MonitorSource::Group(i), MonitorVariable::Spikes) => {
                    for &id in &self.groups[i].spiked_ids {
                        if m.mask[id as usize] {
                            record.push_spike(t, id);
                        }
                    }
                }
                (MonitorSource::Generator(i), _) => {
                    for &id in &self.generators[i].spiked_ids {
                        if m.mask[id as usize] {
                            record.push_spike(t, id);
                        }
                    }
                }
                (MonitorSource::Group(i), _) => {
                    let state = &self.groups[i].state;
                    for &id in &m.ids {
                        let s = &state[id as usize];
                        let value = if var == MonitorVariable::Current {
                            s.current
                        } else {
                            s.voltage
                        };
                        record.push_value(t, id, value);
                    }
                }
                (MonitorSource::Synapses(i), _) => {
                    let syn = &self.synapses[i];
                    for &id in &m.ids {
                        let c = id as usize;
                        let trace = syn.plastic.as_ref().map(|p| p.traces[c]).unwrap_or_default();
                        let value = match var {
                            MonitorVariable::Mantissa => syn.weights[c].mantissa,
                            MonitorVariable::Weight => syn.weights[c].actual,
                            MonitorVariable::X1 => trace.x1,
                            MonitorVariable::X2 => trace.x2,
                            MonitorVariable::Y1 => trace.y1,
                            MonitorVariable::Y2 => trace.y2,
                            MonitorVariable::Y3 => trace.y3,
                            _ => unreachable!("validated"),
                        };
                        record.push_value(t, id, value);
                    }
                }
            }
        }
    }
}
