use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use smc_ei::Execution;
use smc_ei_bench::{
    ml_reference_prep, read_theta, run_benchmark, summarize_dir, write_theta, Algorithm, BenchmarkSpec,
};

/// Benchmark harness for SMC-based and plug-in expected improvement.
///
/// The number of concurrent runs is read from BENCH_WORKERS.
#[derive(Parser)]
#[command(name = "bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs repeated seeded optimizations and writes per-run and summary CSVs.
    Run {
        #[arg(long = "fn")]
        function: String,
        /// smc-ei or ref-ei.
        #[arg(long)]
        alg: Algorithm,
        #[arg(long = "I", default_value_t = 100)]
        particles: usize,
        #[arg(long = "J", default_value_t = 100)]
        per_particle: usize,
        #[arg(long, default_value_t = 80)]
        budget: usize,
        /// Initial design size, max(4, 2d) by default.
        #[arg(long)]
        n0: Option<usize>,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Resample and move at every iteration instead of only when ESS < I/2.
        #[arg(long)]
        always_resample: bool,
        /// Log-range file from `prep-ref` (ref-ei only). Computed on the fly
        /// with a 500-point design and seed 7 when absent.
        #[arg(long)]
        theta: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimates the reference log-ranges by maximum likelihood on a large design.
    PrepRef {
        #[arg(long = "fn")]
        function: String,
        #[arg(long, default_value_t = 500)]
        design: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recomputes summary.csv from the per-run CSVs of a directory.
    Summarize { dir: PathBuf },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            function,
            alg,
            particles,
            per_particle,
            budget,
            n0,
            runs,
            seed,
            always_resample,
            theta,
            out,
        } => {
            let theta = match (alg, theta) {
                (Algorithm::RefEi, Some(path)) => Some(read_theta(&path)?),
                (Algorithm::RefEi, None) => {
                    log::info!("no --theta given, estimating log-ranges on a 500-point design");
                    Some(ml_reference_prep(&function, 500, 7, Execution::Parallel)?)
                }
                (Algorithm::SmcEi, _) => None,
            };
            let spec = BenchmarkSpec {
                function,
                algorithm: alg,
                particles,
                per_particle,
                budget,
                n0,
                runs,
                seed,
                always_resample,
                theta,
                out,
            };
            let output = run_benchmark(&spec)?;
            if let Some(last) = output.summary.last() {
                println!(
                    "n = {}: mean log-error {:.4}, median {:.4} [{:.4}, {:.4}]",
                    last.n, last.mean, last.median, last.q1, last.q3
                );
            }
        }
        Command::PrepRef {
            function,
            design,
            seed,
            out,
        } => {
            let theta = ml_reference_prep(&function, design, seed, Execution::Parallel)?;
            write_theta(&out, &function, &theta)?;
            println!("log-ranges {:?} written to {}", theta.log_ranges(), out.display());
        }
        Command::Summarize { dir } => {
            let rows = summarize_dir(&dir)?;
            println!(
                "{} summary rows written to {}",
                rows.len(),
                dir.join(smc_ei_bench::SUMMARY_FILE).display()
            );
        }
    }
    Ok(())
}
