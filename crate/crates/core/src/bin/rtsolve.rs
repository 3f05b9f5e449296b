use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rtsolve::config::{parse_config_as, ExperimentConfig, Mode};
use rtsolve::experiment::{exit_code, run_experiment, Outcome};
use rtsolve::presets::preset;
use rtsolve::Result;

/// Implicit transport solvers in the diffusive scaling.
#[derive(Parser)]
#[command(name = "rtsolve", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a named setup: example1, example2, example3, example5, example6.
    Preset {
        name: String,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write condition numbers over the configured sweep.
    Condition {
        #[arg(long)]
        config: PathBuf,
    },
    /// Time dense LU against PCG over the configured sweep.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path, mode: Option<Mode>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_as(&text, mode)
}

fn execute(cmd: Command) -> Result<Outcome> {
    let cfg = match cmd {
        Command::Run { config } => load(&config, None)?,
        Command::Condition { config } => load(&config, Some(Mode::Condition))?,
        Command::Bench { config } => load(&config, Some(Mode::Bench))?,
        Command::Preset {
            name,
            epsilon,
            tmax,
            out,
        } => preset(&name, epsilon, tmax, out.as_deref())?,
    };
    run_experiment(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(cli.command);
    match &result {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            for (k, v) in &outcome.summary {
                println!("{k} = {v:e}");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
