//! chaos-ns: solve the stochastic Navier-Stokes equation on the 2-D torus
//! two ways (Wiener-chaos propagator, Monte Carlo paths) and cross-validate.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chaos_ns_cli::{
    cmd_compare, cmd_montecarlo, cmd_propagate, cmd_spectrum, cmd_validate, CliError,
    ExperimentConfig, RunContext,
};

#[derive(Parser)]
#[command(name = "chaos-ns", version, about)]
struct Cli {
    /// Worker threads for the solver inner loops (default: machine
    /// parallelism; CHAOS_NS_WORKERS is the fallback).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory for reports, CSV series and snapshots.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the config's Monte Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full invariant suite; exit 0 iff everything passes.
    Validate,
    /// Integrate the chaos propagator system and write its series.
    Propagate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the Monte Carlo ensemble and write its series.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run both solvers and cross-validate moments and pathwise solutions.
    Compare {
        #[arg(long)]
        config: PathBuf,
    },
    /// Dump the Kraichnan spectrum, mode inventory and Ito correction.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
    },
}

fn install_thread_pool(workers: Option<usize>) {
    let workers = workers.or_else(|| {
        std::env::var("CHAOS_NS_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!("warning: could not configure {n} workers: {e}");
        }
    }
}

fn run_with_config<F>(config: &PathBuf, f: F) -> ExitCode
where
    F: FnOnce(&ExperimentConfig) -> Result<chaos_ns_cli::report::RunReport, CliError>,
{
    let cfg = match ExperimentConfig::load(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match f(&cfg) {
        Ok(report) => {
            for v in &report.verdicts {
                eprintln!(
                    "{} {}: {}",
                    if v.pass { "PASS" } else { "FAIL" },
                    v.name,
                    v.detail
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    install_thread_pool(cli.workers);
    let ctx = RunContext {
        out_dir: cli.out.clone(),
        seed_override: cli.seed,
    };
    match &cli.command {
        Command::Validate => {
            let (code, json) = cmd_validate();
            println!("{json}");
            ExitCode::from(code as u8)
        }
        Command::Propagate { config } => run_with_config(config, |cfg| cmd_propagate(cfg, &ctx)),
        Command::Montecarlo { config } => run_with_config(config, |cfg| cmd_montecarlo(cfg, &ctx)),
        Command::Compare { config } => run_with_config(config, |cfg| cmd_compare(cfg, &ctx)),
        Command::Spectrum { config } => run_with_config(config, |cfg| cmd_spectrum(cfg, &ctx)),
    }
}
