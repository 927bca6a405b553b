use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use mfal_cli::output::emit_surface_grid;
use mfal_cli::{report, run, RunConfig, RunOptions};
use mfal_core::{MfSurrogate, Problem};

#[derive(Parser)]
#[command(name = "mfal", version, about = "Multi-fidelity active-learning optimization campaigns")]
struct Cli {
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the repetition campaign described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed (overrides `base_seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Concurrent repetitions.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Recompute aggregate and summary tables from an output directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the mean and uncertainty of a saved model on a regular grid.
    Grid {
        /// Model JSON written by `run` (models/rep_NNN.json).
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 101)]
        resolution: usize,
        /// Directory receiving grid.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// List the analytical problems.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config, out, seed, jobs } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            let out = out.or_else(|| cfg.output.clone()).context("no output directory (use --out)")?;
            cfg.output = None;
            let cfg = cfg.resolve()?;
            run(&cfg, &RunOptions { out, jobs, quiet: cli.quiet })?;
        }
        Command::Report { out } => {
            let rows = report(&out)?;
            if !cli.quiet {
                print!("{}", std::fs::read_to_string(out.join("summary.csv"))?);
                eprintln!("{} repetitions", rows.len());
            }
        }
        Command::Grid { model, resolution, out } => {
            let text = std::fs::read_to_string(&model).with_context(|| format!("reading {}", model.display()))?;
            let m: MfSurrogate = serde_json::from_str(&text).context("parsing model")?;
            std::fs::create_dir_all(&out)?;
            emit_surface_grid(&m, resolution, &out.join("grid.csv"))?;
        }
        Command::List => {
            println!("{:<4} {:<26} {:<12} {}", "name", "description", "D", "N");
            for p in Problem::ALL {
                let (lo, hi) = p.domain();
                println!(
                    "{:<4} {:<26} {:<12} 1..={}   domain [{lo}, {hi}]^D",
                    p.name(),
                    p.description(),
                    format!("{:?}", p.supported_dims()),
                    p.max_levels()
                );
            }
        }
    }
    Ok(())
}
