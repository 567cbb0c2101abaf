use std::path::PathBuf;
use std::process::ExitCode;

use cco_cli::commands;
use cco_cli::{CliError, Method, RunOverrides};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cco", version, about = "Coverage and capacity optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the radio environment described by a config's [layout].
    GenEnv {
        #[arg(long)]
        config: PathBuf,
        /// Environment seed, overriding [environment].seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Precompute every sector/downtilt RSRP map into a tensor file.
    Precompute {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Environment file; defaults to <output.dir>/env.toml.
        #[arg(long)]
        env: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one optimizer and write <method>_history.csv and <method>_front.csv.
    Run {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        config: PathBuf,
        /// Run seed, overriding the top-level `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Random: evaluations. BO: iterations after the initial design.
        /// DDPG: iterations per weight.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        lambda_stride: Option<f64>,
        /// Tensor file; defaults to <output.dir>/tensor.bin.
        #[arg(long)]
        tensor: Option<PathBuf>,
        /// Output directory; defaults to output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the number of evaluations the run would record and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Compare histories, write hypervolume curves and coverage rasters.
    Report {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        tensor: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required = true)]
        histories: Vec<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    commands::configure_threads()?;
    match cli.command {
        Command::GenEnv { config, seed, out } => {
            let path = commands::gen_env(&config, seed, out.as_deref())?;
            println!("environment written to {}", path.display());
        }
        Command::Precompute { config, env, out } => {
            let s = commands::precompute(config.as_deref(), env.as_deref(), out.as_deref())?;
            let [sec, tilts, rows, cols] = s.dims;
            println!("tensor {sec} x {tilts} x {rows} x {cols} ({} bytes) written to {}", s.bytes, s.path.display());
            println!("sha256 {}", s.sha256);
        }
        Command::Run { method, config, seed, budget, lambda_stride, tensor, out, dry_run } => {
            let overrides = RunOverrides { seed, budget, lambda_stride };
            if dry_run {
                let cfg = cco_cli::ExperimentConfig::load(&config)?.with_overrides(&overrides, method)?;
                println!("{}: {} evaluations planned", method.name(), cfg.planned_evaluations(method)?);
                return Ok(());
            }
            let s = commands::run(&config, method, &overrides, tensor.as_deref(), out.as_deref())?;
            println!(
                "{}: {} evaluations, front of {}, hypervolume {:.6}",
                s.method.name(),
                s.evaluations,
                s.front_size,
                s.hypervolume
            );
            println!("history {}", s.history.display());
            println!("front {}", s.front.display());
        }
        Command::Report { config, tensor, out, histories } => {
            let s = commands::report(config.as_deref(), tensor.as_deref(), out.as_deref(), &histories)?;
            print!("{}", s.table);
            for f in s.files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
