//! Command-line front end for the perclab simulation library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use perclab::lab::{self, RunConfig};

#[derive(Parser)]
#[command(name = "perclab", about = "Boolean-model simulation laboratory", version)]
struct Cli {
    /// Path to the run configuration file (flat key = value with sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the replica count from the config.
    #[arg(long, global = true)]
    replicas: Option<u64>,

    /// Override the worker thread count from the config.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample point measures and write them in the text format.
    Sample,
    /// Build scenes and write component summaries.
    Scene,
    /// Detect trifurcations, build forests, write edge lists.
    Forest,
    /// Run the walk stationarity diagnostic.
    Walk,
    /// Run a named experiment.
    Experiment {
        /// pivotal | indist | monotone | connectivity | percolation | transience
        which: String,
    },
    /// Print the data dictionary for all emitted CSV tables.
    Dictionary,
}

fn load_config(cli: &Cli) -> perclab::Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| perclab::Error::invalid_config("--config is required for this subcommand"))?;
    let text = std::fs::read_to_string(path)?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(replicas) = cli.replicas {
        cfg.replicas = replicas;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> perclab::Result<()> {
    if let Command::Dictionary = cli.command {
        print!("{}", lab::data_dictionary());
        return Ok(());
    }
    let cfg = load_config(cli)?;
    let output = match &cli.command {
        Command::Sample => lab::run_sample(&cfg)?,
        Command::Scene => lab::run_scene(&cfg)?,
        Command::Forest => lab::run_forest(&cfg)?,
        Command::Walk => lab::run_walk(&cfg)?,
        Command::Experiment { which } => lab::run_experiment(&cfg, which)?,
        Command::Dictionary => unreachable!(),
    };
    output.write_to(&cli.out)?;
    eprintln!(
        "{}: wrote {} artifacts + manifest.json to {}",
        output.command,
        output.artifacts.len(),
        cli.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
