//! `fkl` — command-line runner of the fractional Kirchhoff laboratory.
//!
//! ```text
//! fkl <subcommand> --config <path> [--out <dir>] [--threads <k>] [--verbose]
//! ```
//!
//! Exit codes: 0 success, 1 configuration error, 2 solver failure,
//! 3 certificate failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Failure, Run};
use config::Config;

#[derive(Parser, Debug)]
#[command(name = "fkl", version, about = "Fractional Kirchhoff ground states and semiclassical spikes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `[output] dir`; default `fkl-out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Progress messages on stderr.
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Base ground state Q with residual and decay certificates.
    GroundState(Common),
    /// Kirchhoff constant E0 and the rescaled ground state U.
    Scale(Common),
    /// Low spectrum of the linearized operator.
    Spectrum(Common),
    /// Minimizer of the reduced functional at one ε.
    Semiclassical(Common),
    /// Concentration sweep over a list of ε.
    Sweep(Common),
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (common, which) = match &cli.command {
        Command::GroundState(c) => (c, "ground-state"),
        Command::Scale(c) => (c, "scale"),
        Command::Spectrum(c) => (c, "spectrum"),
        Command::Semiclassical(c) => (c, "semiclassical"),
        Command::Sweep(c) => (c, "sweep"),
    };
    env_logger::Builder::new()
        .filter_level(if common.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .format_timestamp(None)
        .init();
    if let Some(k) = common.threads {
        if k == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Config(format!("cannot configure {k} threads: {e}")))?;
    }
    let config = Config::load(&common.config)?;
    let out = common
        .out
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("fkl-out"));
    log::info!("{which}: config {} → {}", common.config.display(), out.display());
    let ctx = Run::new(&config, &out);
    match which {
        "ground-state" => commands::ground_state(&ctx),
        "scale" => commands::scale(&ctx),
        "spectrum" => commands::spectrum_cmd(&ctx),
        "semiclassical" => commands::semiclassical(&ctx),
        _ => commands::sweep(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let kind = match f {
                Failure::Config(_) => "configuration error",
                Failure::Solver(_) => "solver failure",
                Failure::Certificate(_) => "certificate failure",
            };
            eprintln!("fkl: {kind}: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
