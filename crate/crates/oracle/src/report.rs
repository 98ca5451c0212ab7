use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("serialization error: {0}")]
    Serialize(#[from] toml::ser::Error),
}

/// One checked quantity. `passed` is `|observed - expected| <= tolerance`
/// unless the metric was built with [`Metric::check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Metric {
    pub fn within(name: impl Into<String>, observed: f64, expected: f64, tolerance: f64) -> Self {
        Metric {
            name: name.into(),
            observed,
            expected,
            tolerance,
            passed: (observed - expected).abs() <= tolerance,
        }
    }

    /// Upper bound: passes when `observed <= limit`.
    pub fn at_most(name: impl Into<String>, observed: f64, limit: f64) -> Self {
        Metric {
            name: name.into(),
            observed,
            expected: limit,
            tolerance: 0.0,
            passed: observed <= limit,
        }
    }

    /// Lower bound: passes when `observed >= limit`.
    pub fn at_least(name: impl Into<String>, observed: f64, limit: f64) -> Self {
        Metric {
            name: name.into(),
            observed,
            expected: limit,
            tolerance: 0.0,
            passed: observed >= limit,
        }
    }

    /// Informational value that never fails.
    pub fn info(name: impl Into<String>, observed: f64) -> Self {
        Metric {
            name: name.into(),
            observed,
            expected: observed,
            tolerance: 0.0,
            passed: true,
        }
    }
}

/// Tabular side output, written as CSV next to the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub experiment: String,
    pub seed: u64,
    pub samples: u64,
    pub passed: bool,
    pub metrics: Vec<Metric>,
    pub tables: Vec<Table>,
}

impl ValidationReport {
    pub fn new(experiment: impl Into<String>, seed: u64) -> Self {
        ValidationReport {
            experiment: experiment.into(),
            seed,
            samples: 0,
            passed: true,
            metrics: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn push(&mut self, metric: Metric) {
        self.passed &= metric.passed;
        self.metrics.push(metric);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Metric> {
        self.metrics.iter().filter(|m| !m.passed)
    }

    pub fn to_toml(&self) -> Result<String, toml::ser::Error> {
        toml::to_string(self)
    }

    /// Writes `<experiment>.toml` and one `<experiment>_<table>.csv` per table.
    pub fn write_to(&self, dir: &Path) -> Result<(), ReportError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{}.toml", self.experiment)), self.to_toml()?)?;
        for table in &self.tables {
            let file = fs::File::create(dir.join(format!("{}_{}.csv", self.experiment, table.name)))?;
            table.write_csv(io::BufWriter::new(file))?;
        }
        Ok(())
    }
}
