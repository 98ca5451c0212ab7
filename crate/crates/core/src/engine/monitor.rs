//! Probe recordings and their CSV form.

use std::io::{self, Write};

use super::def::MonitorVariable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MonitorSource {
    Group(usize),
    Generator(usize),
    Synapses(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sample {
    pub step: u64,
    pub id: u32,
    /// Always 1 for spike monitors.
    pub value: i64,
}

/// Everything one monitor recorded, in step order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonitorRecord {
    pub name: String,
    pub source: String,
    pub variable: MonitorVariable,
    pub samples: Vec<Sample>,
}

impl MonitorRecord {
    pub fn new(name: String, source: String, variable: MonitorVariable) -> Self {
        MonitorRecord {
            name,
            source,
            variable,
            samples: Vec::new(),
        }
    }

    pub(crate) fn push_spike(&mut self, step: u64, id: u32) {
        self.samples.push(Sample { step, id, value: 1 });
    }

    pub(crate) fn push_value(&mut self, step: u64, id: u32, value: i64) {
        self.samples.push(Sample { step, id, value });
    }

    pub fn is_spikes(&self) -> bool {
        self.variable == MonitorVariable::Spikes
    }

    /// Recorded values of one id, in step order.
    pub fn series(&self, id: u32) -> Vec<i64> {
        self.samples.iter().filter(|s| s.id == id).map(|s| s.value).collect()
    }

    /// `(step, id)` of every recorded spike.
    pub fn spikes(&self) -> Vec<(u64, u32)> {
        self.samples.iter().map(|s| (s.step, s.id)).collect()
    }

    /// `step,id,value` rows (`step,id` for spikes) with a header line.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut out = io::BufWriter::new(out);
        if self.is_spikes() {
            writeln!(out, "step,id")?;
            for s in &self.samples {
                writeln!(out, "{},{}", s.step, s.id)?;
            }
        } else {
            writeln!(out, "step,id,value")?;
            for s in &self.samples {
                writeln!(out, "{},{},{}", s.step, s.id, s.value)?;
            }
        }
        out.flush()
    }
}
