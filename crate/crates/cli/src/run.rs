use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use loihi_core::engine::{EngineError, RunConfig, Simulation};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config: String,
    pub seed: u64,
    pub steps: u64,
    pub output_dir: String,
    /// SHA-256 of the resolved configuration serialized as JSON.
    pub config_hash: String,
    pub version: String,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub steps: u64,
    pub wall_time_seconds: f64,
    pub config_hash: String,
    pub monitors: Vec<String>,
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    RunConfig::load(path).map_err(|e| CliError::Config(e.to_string()))
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    RunConfig::from_toml_str(text).map_err(|e| CliError::Config(e.to_string()))
}

pub fn config_hash(config: &RunConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes to JSON");
    hex::encode(Sha256::digest(json))
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = toml::to_string(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Build, write the manifest, simulate, then write one CSV per monitor and
/// a summary.
pub fn execute(config: &RunConfig, source: &str, out: &Path) -> Result<RunSummary, CliError> {
    let mut sim = Simulation::build(&config.network).map_err(|e| CliError::Validation(e.issues))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let hash = config_hash(config);
    let manifest = RunManifest {
        config: source.to_string(),
        seed: config.network.seed,
        steps: config.steps,
        output_dir: out.display().to_string(),
        config_hash: hash.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_toml(&out.join("manifest.toml"), &manifest)?;

    let start = Instant::now();
    sim.run(config.steps).map_err(|e| match e {
        EngineError::Overflow { .. } => CliError::Overflow(e.to_string()),
    })?;
    let wall = start.elapsed().as_secs_f64();

    let mut monitors = Vec::new();
    for record in sim.records() {
        let path: PathBuf = out.join(format!("{}.csv", record.name));
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        record
            .write_csv(BufWriter::new(file))
            .with_context(|| format!("writing {}", path.display()))?;
        monitors.push(record.name.clone());
    }
    let summary = RunSummary {
        seed: config.network.seed,
        steps: config.steps,
        wall_time_seconds: wall,
        config_hash: hash,
        monitors,
    };
    write_toml(&out.join("summary.toml"), &summary)?;
    Ok(summary)
}
