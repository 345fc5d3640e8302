use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fdjrc::harness::{emit_csv, run_design, run_experiment, run_radar, ExperimentConfig};
use fdjrc::Result;

#[derive(Parser)]
#[command(
    name = "fdjrc",
    version,
    about = "Full-duplex joint radar-communication beamforming simulator"
)]
struct Cli {
    /// Overrides `base_seed` from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design beamformers toward one angle and report their metrics.
    Design {
        #[arg(long)]
        config: PathBuf,
        /// Target angle in degrees.
        #[arg(long, allow_negative_numbers = true)]
        angle: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-target estimates plus angle-range and range-velocity maps.
    Radar {
        #[arg(long)]
        config: PathBuf,
        /// Writes `<prefix>_estimates.csv`, `<prefix>_angle_range.csv` and `<prefix>_range_velocity.csv`.
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Monte Carlo experiment described by the config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Design { config, angle, out } => {
            let cfg = load(&config, cli.seed)?;
            emit_csv(&run_design(&cfg, angle)?, &out)
        }
        Command::Radar { config, out_prefix } => {
            let cfg = load(&config, cli.seed)?;
            run_radar(&cfg, &out_prefix).map(|_| ())
        }
        Command::Experiment { config, out } => {
            let cfg = load(&config, cli.seed)?;
            emit_csv(&run_experiment(&cfg)?, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
