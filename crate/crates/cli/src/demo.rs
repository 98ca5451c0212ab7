use std::path::Path;

use anyhow::Context;
use clap::ValueEnum;
use loihi_oracle::stdp_window_experiment;

use crate::error::CliError;
use crate::run;
use crate::validate::{print_report, stdp_rule, STDP_TAU, STDP_TRIALS};

pub const SINGLE_NEURON: &str = include_str!("../../../configs/single_neuron.toml");
pub const NETWORK500: &str = include_str!("../../../configs/network500.toml");
pub const STDP: &str = include_str!("../../../configs/stdp.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Demo {
    SingleNeuron,
    Network500,
    Stdp,
}

impl Demo {
    fn config(self) -> (&'static str, &'static str) {
        match self {
            Demo::SingleNeuron => ("configs/single_neuron.toml", SINGLE_NEURON),
            Demo::Network500 => ("configs/network500.toml", NETWORK500),
            Demo::Stdp => ("configs/stdp.toml", STDP),
        }
    }
}

pub fn execute(demo: Demo, seed: Option<u64>, steps: Option<u64>, out: &Path) -> Result<(), CliError> {
    let (source, text) = demo.config();
    let mut config = run::parse_config(text)?;
    if let Some(seed) = seed {
        config.network.seed = seed;
    }
    if let Some(steps) = steps {
        config.steps = steps;
    }
    let summary = run::execute(&config, source, out)?;
    eprintln!(
        "{source}: {} steps in {:.2}s, output in {}",
        summary.steps,
        summary.wall_time_seconds,
        out.display()
    );
    if demo == Demo::Stdp {
        let window = stdp_window_experiment(&stdp_rule(), STDP_TAU, STDP_TRIALS, config.network.seed);
        let path = out.join("dw_vs_delta_t.csv");
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(["delta_t", "dw"]).context("writing window")?;
        for s in &window.samples {
            w.write_record([s.delta_t.to_string(), s.dw.to_string()])
                .context("writing window")?;
        }
        w.flush().context("writing window")?;
        window.report.write_to(out).context("writing stdp report")?;
        print_report(&window.report);
    }
    Ok(())
}
