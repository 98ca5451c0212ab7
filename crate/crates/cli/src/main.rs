use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use loihi_core::plasticity::LearningRule;
use loihi_core::weights::{weight_table, SignMode};

mod demo;
mod error;
mod run;
mod validate;

use error::CliError;

/// Bit-exact emulator of a Loihi compute unit.
#[derive(Parser)]
#[command(name = "loihi-emu", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a network config and write one CSV per monitor.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's step count.
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long, env = "LOIHI_EMU_OUT", default_value = "loihi-out")]
        out: PathBuf,
    },
    /// Print all 4096 mantissa/exponent combinations of a weight format.
    WeightTable {
        #[arg(long)]
        sign_mode: SignMode,
        #[arg(long, default_value_t = 8)]
        weight_bits: u32,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run statistical and reference checks; exits 1 if any metric fails.
    Validate {
        #[arg(long, value_enum, default_value_t = validate::Suite::All)]
        suite: validate::Suite,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory for reports and histogram CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a learning rule and print its normalized form.
    ValidateRule { rule: String },
    /// Run one of the bundled demo networks.
    Demo {
        #[arg(value_enum)]
        name: demo::Demo,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long, env = "LOIHI_EMU_OUT", default_value = "loihi-out")]
        out: PathBuf,
    },
}

fn write_weight_table(sign_mode: SignMode, weight_bits: u32, out: Option<PathBuf>) -> Result<(), CliError> {
    let rows = weight_table(sign_mode, weight_bits).map_err(|e| CliError::Config(e.to_string()))?;
    let sink: Box<dyn io::Write> = match &out {
        Some(path) => Box::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let written = rows
        .iter()
        .try_for_each(|row| w.serialize(row))
        .and_then(|()| w.flush().map_err(csv::Error::from));
    match written {
        Err(e) if matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == io::ErrorKind::BrokenPipe) => Ok(()),
        other => Ok(other.context("writing weight table")?),
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            config,
            seed,
            steps,
            out,
        } => {
            let mut resolved = run::load_config(&config)?;
            if let Some(seed) = seed {
                resolved.network.seed = seed;
            }
            if let Some(steps) = steps {
                resolved.steps = steps;
            }
            run::execute(&resolved, &config.display().to_string(), &out)?;
            Ok(())
        }
        Command::WeightTable {
            sign_mode,
            weight_bits,
            out,
        } => write_weight_table(sign_mode, weight_bits, out),
        Command::Validate { suite, seed, out } => validate::execute(suite, seed, out.as_deref()),
        Command::ValidateRule { rule } => {
            let parsed = LearningRule::parse(&rule).map_err(|e| CliError::Rule(e.to_string()))?;
            println!("{parsed}");
            Ok(())
        }
        Command::Demo { name, seed, steps, out } => demo::execute(name, seed, steps, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
