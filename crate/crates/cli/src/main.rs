use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod exact_cmd;
mod output;

use commands::Failure;
use config::{Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "coupling-lab",
    version,
    about = "Couplings of lattice particle systems and finite Markov chains"
)]
struct Cli {
    /// Worker threads for replica runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a coupled pair and record discrepancy, pairing and mismatch series.
    Couple(ConfigArgs),
    /// Track ball densities and check the per-step drift bound.
    Density(ConfigArgs),
    /// Estimate Cesaro averages of cylinder probabilities.
    Cesaro(ConfigArgs),
    /// Write one trajectory of the first component.
    Simulate(ConfigArgs),
    /// Check the coupling inequality on a finite chain.
    Exact(ExactCli),
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Pairing events of replica 0, one JSON object per line.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ExactCli {
    /// Transition matrix: a size line, then one row per state.
    #[arg(long)]
    chain: PathBuf,
    /// Coupling kernel on pairs, row (i, j) at index i * n + j. Defaults to the independent kernel glued on the diagonal.
    #[arg(long)]
    kernel: Option<PathBuf>,
    #[arg(long)]
    x: usize,
    #[arg(long)]
    y: usize,
    #[arg(long, default_value_t = 50)]
    horizon: usize,
    /// Use exact rational arithmetic.
    #[arg(long)]
    exact: bool,
    /// Also check that splicing the coupled paths preserves the law of the second chain.
    #[arg(long)]
    splice: bool,
    #[arg(long, default_value_t = 1_000_000)]
    path_cap: usize,
    /// Report path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn experiment(args: &ConfigArgs) -> Result<Experiment, Failure> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        config.plan.seed = s;
    }
    if let Some(r) = args.replicas {
        config.plan.replicas = r;
    }
    if let Some(h) = args.horizon {
        config.plan.horizon = h;
    }
    if let Some(p) = &args.csv {
        config.output.csv = Some(p.clone());
    }
    if let Some(p) = &args.json {
        config.output.json = Some(p.clone());
    }
    if let Some(p) = &args.trace {
        config.output.trace = Some(p.clone());
    }
    Ok(Experiment::new(config)?)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Couple(a) => commands::couple(&experiment(&a)?),
        Command::Density(a) => commands::density(&experiment(&a)?),
        Command::Cesaro(a) => commands::cesaro(&experiment(&a)?),
        Command::Simulate(a) => commands::simulate(&experiment(&a)?),
        Command::Exact(a) => exact_cmd::run(&exact_cmd::ExactArgs {
            chain: a.chain,
            kernel: a.kernel,
            x: a.x,
            y: a.y,
            horizon: a.horizon,
            exact: a.exact,
            splice: a.splice,
            path_cap: a.path_cap,
            out: a.out,
        }),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
