use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use vlcmod_cli::{run, CliError, Command, ExperimentConfig};

/// Link-level experiments for visible-light MIMO modulation schemes.
#[derive(Debug, Parser)]
#[command(name = "vlcmod", version)]
struct Args {
    /// ber-curve, bound-curve, sweep-dtx, sweep-rotation, ofdm-ber,
    /// placement-metrics, snr-map, rate-contour or coverage.
    command: Command,
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory the CSV output is written to.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides [simulation] seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides [simulation] workers (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn execute(args: &Args) -> Result<String, CliError> {
    let mut cfg = ExperimentConfig::load(args.config.as_deref(), std::env::vars())?;
    if let Some(seed) = args.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(workers) = args.workers {
        cfg.simulation.workers = workers;
    }
    Ok(run(args.command, &cfg, &args.out)?.summary)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("vlcmod: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
