use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cdperc_core::experiment::{self, ExperimentConfig, FitMode, StatsReport, WORKERS_ENV};
use cdperc_core::{estimator, io, Error};
use clap::{Args, Parser, Subcommand};

/// Constrained-degree bond percolation on periodic hypercubic lattices.
#[derive(Parser, Debug)]
#[command(name = "cdperc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate runs and write one histogram file per (d, L, k, batch).
    Simulate(SimulateArgs),
    /// Evaluate ψ(t) and ψ'(t) of a histogram on a uniform grid (CSV).
    Curve {
        histogram: PathBuf,
        #[arg(long, default_value_t = estimator::DEFAULT_GRID)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean threshold, slope maximum, ψ(1) and x_k per input file (JSON).
    Stats {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = estimator::DEFAULT_GRID)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-size-scaling or x_k line fits from a stats JSON file.
    Fit {
        stats: PathBuf,
        /// tc, nu or xk-slope
        #[arg(long)]
        mode: FitMode,
        /// Weight points by 1/err² (errors taken from batch spreads).
        #[arg(long)]
        weighted: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay shared bond orders under several k and compare wrap times.
    Couple {
        #[arg(long)]
        d: u32,
        #[arg(long = "L")]
        side: u32,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u32>,
        #[arg(long)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// JSON experiment description; command-line flags are ignored when set.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    d: Option<u32>,
    #[arg(long = "L", value_delimiter = ',', required_unless_present = "config")]
    side: Vec<u32>,
    #[arg(long, value_delimiter = ',', required_unless_present = "config")]
    k: Vec<u32>,
    #[arg(long, required_unless_present = "config")]
    runs: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    batches: u32,
    #[arg(long)]
    measure_xk: bool,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidLattice(_) | Error::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::Data(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Data(e.to_string()))
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let config = match &args.config {
        Some(path) => ExperimentConfig::from_json_file(path).map_err(|e| match e {
            Error::Io(_) | Error::Json(_) => Failure::Usage(format!("{}: {e}", path.display())),
            other => other.into(),
        })?,
        None => ExperimentConfig {
            d: args.d.expect("required by clap"),
            sides: args.side,
            k: args.k,
            runs: args.runs.expect("required by clap"),
            seed: args.seed,
            batches: args.batches,
            measure_xk: args.measure_xk,
            grid: estimator::DEFAULT_GRID,
            workers: args.workers,
            out_dir: Some(args.out),
        },
    };
    config.validate()?;
    let pool = experiment::thread_pool(experiment::resolve_workers(config.workers))?;
    let cells = experiment::simulate(&config, &pool)?;
    let dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let paths = experiment::write_cells(&dir, &cells)
        .map_err(|e| Failure::Data(format!("cannot write to {}: {e}", dir.display())))?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Curve {
            histogram,
            grid,
            out,
        } => {
            if grid < 2 {
                return Err(Failure::Usage("grid must have at least 2 points".into()));
            }
            let file = io::read_histogram(&histogram)?;
            let q = file.hist.q_bar()?;
            let samples = estimator::curve(&q, grid)?;
            emit(out.as_deref(), &io::format_curve(&file, &samples))
        }
        Command::Stats { files, grid, out } => {
            if grid < 3 {
                return Err(Failure::Usage("grid must have at least 3 points".into()));
            }
            let data = files
                .iter()
                .map(|p| {
                    io::read_data_file(p)
                        .map_err(|e| Failure::Data(format!("{}: {e}", p.display())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let report = experiment::stats_from_files(data, grid)?;
            emit(out.as_deref(), &to_json(&report)?)
        }
        Command::Fit {
            stats,
            mode,
            weighted,
            out,
        } => {
            let text = std::fs::read_to_string(&stats)
                .map_err(|e| Failure::Data(format!("{}: {e}", stats.display())))?;
            let report: StatsReport = serde_json::from_str(&text)
                .map_err(|e| Failure::Data(format!("{}: {e}", stats.display())))?;
            let fit = experiment::fit_stats(&report, mode, weighted)?;
            emit(out.as_deref(), &to_json(&fit)?)
        }
        Command::Couple {
            d,
            side,
            k,
            runs,
            seed,
            workers,
            out,
        } => {
            let pool = experiment::thread_pool(experiment::resolve_workers(workers))?;
            let report = experiment::couple(&pool, d, side, &k, runs, seed)?;
            emit(out.as_deref(), &to_json(&report)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
