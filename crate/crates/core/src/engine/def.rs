//! Serializable network definitions and their validation.
//!
//! A definition is plain data: neuron groups, spike generator groups,
//! synapse groups (with an explicit, file-backed or seeded random
//! connection list) and monitors. [`NetworkDef::validate`] reports every
//! violation at once rather than stopping at the first.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixedpoint::RandomStream;
use crate::neuron::CompartmentParams;
use crate::plasticity::{LearningRule, TraceParams, Variable};
use crate::weights::{SignMode, WeightConfig, EXPONENT_MAX, EXPONENT_MIN};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("connection file {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// Every problem found in a definition.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid network definition:\n  {}", .issues.join("\n  "))]
pub struct ValidationError {
    pub issues: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronGroupDef {
    pub name: String,
    pub size: u32,
    #[serde(flatten)]
    pub params: CompartmentParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratorKind {
    /// Fixed spike times as `[id, step]` pairs.
    Explicit { spikes: Vec<(u32, u64)> },
    /// Independent Bernoulli draw per unit and step.
    Bernoulli { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorDef {
    pub name: String,
    pub size: u32,
    #[serde(flatten)]
    pub kind: GeneratorKind,
}

/// One synapse: `src -> dst` with mantissa, exponent and extra delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(u32, u32, i64, i32, u32)", into = "(u32, u32, i64, i32, u32)")]
pub struct ConnectionRow {
    pub src: u32,
    pub dst: u32,
    pub mantissa: i64,
    pub exponent: i32,
    pub delay: u32,
}

impl From<(u32, u32, i64, i32, u32)> for ConnectionRow {
    fn from((src, dst, mantissa, exponent, delay): (u32, u32, i64, i32, u32)) -> Self {
        ConnectionRow {
            src,
            dst,
            mantissa,
            exponent,
            delay,
        }
    }
}

impl From<ConnectionRow> for (u32, u32, i64, i32, u32) {
    fn from(r: ConnectionRow) -> Self {
        (r.src, r.dst, r.mantissa, r.exponent, r.delay)
    }
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    src: u32,
    dst: u32,
    mantissa: i64,
    exponent: i32,
    delay: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MantissaDist {
    Constant {
        value: i64,
    },
    /// `round(LogNormal(mu, sigma))`, clipped to the sign-mode magnitude and
    /// negated for inhibitory groups.
    Lognormal {
        mu: f64,
        sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomConnectivity {
    pub probability: f64,
    /// Half-open source id range `[start, end)`; all sources when absent.
    #[serde(default)]
    pub source_ids: Option<(u32, u32)>,
    #[serde(default)]
    pub target_ids: Option<(u32, u32)>,
    pub mantissa: MantissaDist,
    #[serde(default)]
    pub exponent: i32,
    #[serde(default)]
    pub delay: u32,
    #[serde(default)]
    pub allow_self: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Connectivity {
    List {
        rows: Vec<ConnectionRow>,
    },
    /// CSV with header `src,dst,mantissa,exponent,delay`, relative to the
    /// config file.
    Csv {
        path: PathBuf,
    },
    Random(RandomConnectivity),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlasticityDef {
    #[serde(default)]
    pub rule: Option<String>,
    #[serde(default)]
    pub x1: Option<TraceParams>,
    #[serde(default)]
    pub x2: Option<TraceParams>,
    #[serde(default)]
    pub y1: Option<TraceParams>,
    #[serde(default)]
    pub y2: Option<TraceParams>,
    #[serde(default)]
    pub y3: Option<TraceParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynapseGroupDef {
    pub name: String,
    pub source: String,
    pub target: String,
    pub sign_mode: SignMode,
    #[serde(default = "default_weight_bits")]
    pub weight_bits: u32,
    pub connections: Connectivity,
    #[serde(default)]
    pub plastic: bool,
    #[serde(default)]
    pub plasticity: Option<PlasticityDef>,
}

fn default_weight_bits() -> u32 {
    8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MonitorVariable {
    #[serde(rename = "I")]
    Current,
    #[serde(rename = "v")]
    Voltage,
    #[serde(rename = "spikes")]
    Spikes,
    #[serde(rename = "w")]
    Mantissa,
    #[serde(rename = "J")]
    Weight,
    #[serde(rename = "x1")]
    X1,
    #[serde(rename = "x2")]
    X2,
    #[serde(rename = "y1")]
    Y1,
    #[serde(rename = "y2")]
    Y2,
    #[serde(rename = "y3")]
    Y3,
}

impl MonitorVariable {
    /// Synaptic input and traces are probed right after the synapse phase;
    /// everything else at the end of the step.
    pub fn phase(self) -> Phase {
        match self {
            MonitorVariable::Current
            | MonitorVariable::X1
            | MonitorVariable::X2
            | MonitorVariable::Y1
            | MonitorVariable::Y2
            | MonitorVariable::Y3 => Phase::Synapses,
            _ => Phase::End,
        }
    }

    fn on_synapses(self) -> bool {
        matches!(
            self,
            MonitorVariable::Mantissa
                | MonitorVariable::Weight
                | MonitorVariable::X1
                | MonitorVariable::X2
                | MonitorVariable::Y1
                | MonitorVariable::Y2
                | MonitorVariable::Y3
        )
    }
}

/// The fixed per-step phase order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Start,
    Synapses,
    Groups,
    Thresholds,
    Resets,
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorDef {
    pub name: String,
    /// Neuron group, generator group, or synapse group name.
    pub source: String,
    pub variable: MonitorVariable,
    /// Unit (or connection) indices; all when absent.
    #[serde(default)]
    pub ids: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkDef {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub groups: Vec<NeuronGroupDef>,
    #[serde(default)]
    pub generators: Vec<GeneratorDef>,
    #[serde(default)]
    pub synapses: Vec<SynapseGroupDef>,
    #[serde(default)]
    pub monitors: Vec<MonitorDef>,
}

/// A network definition plus run length, as read from a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub steps: u64,
    #[serde(flatten)]
    pub network: NetworkDef,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Read a config and inline any CSV connection files, resolving their
    /// paths relative to the config's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = RunConfig::from_toml_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.network.inline_connection_files(base)?;
        Ok(config)
    }
}

pub fn read_connection_csv(path: &Path) -> Result<Vec<ConnectionRow>, ConfigError> {
    let csv_err = |source| ConfigError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    reader
        .deserialize::<CsvRow>()
        .map(|row| {
            row.map(|r| ConnectionRow {
                src: r.src,
                dst: r.dst,
                mantissa: r.mantissa,
                exponent: r.exponent,
                delay: r.delay,
            })
            .map_err(csv_err)
        })
        .collect()
}

enum Endpoint {
    Group(u32),
    Generator(u32),
}

impl NetworkDef {
    pub fn inline_connection_files(&mut self, base: &Path) -> Result<(), ConfigError> {
        for syn in &mut self.synapses {
            if let Connectivity::Csv { path } = &syn.connections {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    base.join(path)
                };
                let rows = read_connection_csv(&full)?;
                syn.connections = Connectivity::List { rows };
            }
        }
        Ok(())
    }

    fn endpoint(&self, name: &str) -> Option<Endpoint> {
        if let Some(g) = self.groups.iter().find(|g| g.name == name) {
            return Some(Endpoint::Group(g.size));
        }
        self.generators
            .iter()
            .find(|g| g.name == name)
            .map(|g| Endpoint::Generator(g.size))
    }

    pub(crate) fn group_size(&self, name: &str) -> Option<u32> {
        self.groups.iter().find(|g| g.name == name).map(|g| g.size)
    }

    pub(crate) fn source_size(&self, name: &str) -> Option<u32> {
        match self.endpoint(name)? {
            Endpoint::Group(n) | Endpoint::Generator(n) => Some(n),
        }
    }

    /// Check every constraint, collecting all violations.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut issues = Vec::new();
        let mut names = HashSet::new();
        let all_names = self
            .groups
            .iter()
            .map(|g| &g.name)
            .chain(self.generators.iter().map(|g| &g.name))
            .chain(self.synapses.iter().map(|s| &s.name));
        for name in all_names {
            if !names.insert(name.as_str()) {
                issues.push(format!("duplicate name '{name}'"));
            }
        }
        let mut monitor_names = HashSet::new();
        for m in &self.monitors {
            if !monitor_names.insert(m.name.as_str()) {
                issues.push(format!("duplicate monitor name '{}'", m.name));
            }
        }

        for g in &self.groups {
            if let Err(e) = g.params.validate() {
                issues.push(format!("group '{}': {e}", g.name));
            }
        }
        for g in &self.generators {
            match &g.kind {
                GeneratorKind::Bernoulli { rate } => {
                    if !(0.0..=1.0).contains(rate) {
                        issues.push(format!("generator '{}': rate {rate} outside [0, 1]", g.name));
                    }
                }
                GeneratorKind::Explicit { spikes } => {
                    for &(id, step) in spikes {
                        if id >= g.size {
                            issues.push(format!(
                                "generator '{}': spike at step {step} for id {id} >= size {}",
                                g.name, g.size
                            ));
                        }
                    }
                }
            }
        }
        for syn in &self.synapses {
            self.validate_synapse(syn, &mut issues);
        }
        for m in &self.monitors {
            self.validate_monitor(m, &mut issues);
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ValidationError { issues })
        }
    }

    fn validate_synapse(&self, syn: &SynapseGroupDef, issues: &mut Vec<String>) {
        let ctx = format!("synapse group '{}'", syn.name);
        let source_size = self.source_size(&syn.source);
        if source_size.is_none() {
            issues.push(format!("{ctx}: unknown source '{}'", syn.source));
        }
        let target_size = self.group_size(&syn.target);
        if target_size.is_none() {
            issues.push(format!("{ctx}: target '{}' is not a neuron group", syn.target));
        }
        if let Err(e) = WeightConfig::new(syn.sign_mode, syn.weight_bits) {
            issues.push(format!("{ctx}: {e}"));
        }
        let (low, high) = syn.sign_mode.mantissa_range();
        match &syn.connections {
            Connectivity::List { rows } => {
                for (i, r) in rows.iter().enumerate() {
                    if let Some(n) = source_size.filter(|&n| r.src >= n) {
                        issues.push(format!(
                            "{ctx}: row {i}: source index {} out of range (size {n})",
                            r.src
                        ));
                    }
                    if let Some(n) = target_size.filter(|&n| r.dst >= n) {
                        issues.push(format!(
                            "{ctx}: row {i}: target index {} out of range (size {n})",
                            r.dst
                        ));
                    }
                    if !(low..=high).contains(&r.mantissa) {
                        issues.push(format!(
                            "{ctx}: row {i}: mantissa {} outside [{low}, {high}]",
                            r.mantissa
                        ));
                    }
                    if !(EXPONENT_MIN..=EXPONENT_MAX).contains(&r.exponent) {
                        issues.push(format!("{ctx}: row {i}: exponent {} outside [-8, 7]", r.exponent));
                    }
                }
            }
            Connectivity::Csv { path } => {
                issues.push(format!("{ctx}: connection file {} was not loaded", path.display()));
            }
            Connectivity::Random(r) => {
                if !(0.0..=1.0).contains(&r.probability) {
                    issues.push(format!(
                        "{ctx}: connection probability {} outside [0, 1]",
                        r.probability
                    ));
                }
                if !(EXPONENT_MIN..=EXPONENT_MAX).contains(&r.exponent) {
                    issues.push(format!("{ctx}: exponent {} outside [-8, 7]", r.exponent));
                }
                for (label, range, size) in [
                    ("source", r.source_ids, source_size),
                    ("target", r.target_ids, target_size),
                ] {
                    if let (Some((a, b)), Some(n)) = (range, size) {
                        if a > b || b > n {
                            issues.push(format!("{ctx}: {label} id range [{a}, {b}) invalid for size {n}"));
                        }
                    }
                }
                match r.mantissa {
                    MantissaDist::Constant { value } if !(low..=high).contains(&value) => {
                        issues.push(format!("{ctx}: mantissa {value} outside [{low}, {high}]"));
                    }
                    MantissaDist::Lognormal { sigma, mu } if !(sigma >= 0.0 && mu.is_finite()) => {
                        issues.push(format!("{ctx}: invalid log-normal parameters mu={mu}, sigma={sigma}"));
                    }
                    _ => {}
                }
            }
        }

        match (syn.plastic, &syn.plasticity) {
            (false, Some(_)) => issues.push(format!("{ctx}: plasticity settings given for a static group")),
            (true, None) | (true, Some(PlasticityDef { rule: None, .. })) => {
                issues.push(format!("{ctx}: plastic group has no learning rule"))
            }
            (true, Some(p)) => {
                let rule = p.rule.as_deref().unwrap_or_default();
                match LearningRule::parse(rule) {
                    Err(e) => issues.push(format!("{ctx}: learning rule: {e}")),
                    Ok(rule) => {
                        let traces = [
                            (Variable::X1, &p.x1, "x1"),
                            (Variable::X2, &p.x2, "x2"),
                            (Variable::Y1, &p.y1, "y1"),
                            (Variable::Y2, &p.y2, "y2"),
                            (Variable::Y3, &p.y3, "y3"),
                        ];
                        for (var, params, label) in traces {
                            match params {
                                None if rule.uses(var) => {
                                    issues.push(format!("{ctx}: rule uses {label} but no trace parameters are given"))
                                }
                                Some(tp) => {
                                    if let Err(e) = tp.validate() {
                                        issues.push(format!("{ctx}: trace {label}: {e}"));
                                    }
                                }
                                None => {}
                            }
                        }
                    }
                }
            }
            (false, None) => {}
        }
    }

    fn validate_monitor(&self, m: &MonitorDef, issues: &mut Vec<String>) {
        let ctx = format!("monitor '{}'", m.name);
        let size = if let Some(g) = self.groups.iter().find(|g| g.name == m.source) {
            if m.variable.on_synapses() {
                issues.push(format!("{ctx}: variable {:?} is not a neuron variable", m.variable));
                return;
            }
            g.size as usize
        } else if let Some(g) = self.generators.iter().find(|g| g.name == m.source) {
            if m.variable != MonitorVariable::Spikes {
                issues.push(format!("{ctx}: generators only support spike monitors"));
                return;
            }
            g.size as usize
        } else if let Some(s) = self.synapses.iter().find(|s| s.name == m.source) {
            if !m.variable.on_synapses() {
                issues.push(format!("{ctx}: variable {:?} is not a synapse variable", m.variable));
                return;
            }
            match &s.connections {
                Connectivity::List { rows } => rows.len(),
                // random connection counts are only known after building
                _ => usize::MAX,
            }
        } else {
            issues.push(format!("{ctx}: unknown source '{}'", m.source));
            return;
        };
        if let Some(ids) = &m.ids {
            for &id in ids {
                if id as usize >= size {
                    issues.push(format!("{ctx}: id {id} out of range (size {size})"));
                }
            }
        }
    }
}

impl RandomConnectivity {
    /// Draw the connection list. Pairs are visited source-major; each is
    /// kept with the configured probability. Self-connections are skipped in
    /// recurrent groups unless `allow_self` is set.
    pub fn generate(
        &self,
        sign_mode: SignMode,
        recurrent: bool,
        source_size: u32,
        target_size: u32,
        rng: &mut RandomStream,
    ) -> Vec<ConnectionRow> {
        let (s0, s1) = self.source_ids.unwrap_or((0, source_size));
        let (t0, t1) = self.target_ids.unwrap_or((0, target_size));
        let (low, high) = sign_mode.mantissa_range();
        let limit = low.abs().max(high.abs());
        let lognormal = match self.mantissa {
            MantissaDist::Lognormal { mu, sigma } => LogNormal::new(mu, sigma).ok(),
            MantissaDist::Constant { .. } => None,
        };
        let mut rows = Vec::new();
        for src in s0..s1 {
            for dst in t0..t1 {
                if recurrent && !self.allow_self && src == dst {
                    continue;
                }
                if !rng.bernoulli(self.probability) {
                    continue;
                }
                let mantissa = match (&self.mantissa, &lognormal) {
                    (MantissaDist::Constant { value }, _) => *value,
                    (_, Some(dist)) => {
                        let magnitude = (dist.sample(rng).round() as i64).min(limit);
                        if sign_mode == SignMode::Inhibitory {
                            -magnitude.min(255)
                        } else {
                            magnitude.min(high)
                        }
                    }
                    (_, None) => 0,
                };
                rows.push(ConnectionRow {
                    src,
                    dst,
                    mantissa,
                    exponent: self.exponent,
                    delay: self.delay,
                });
            }
        }
        rows
    }
}
