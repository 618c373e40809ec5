use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use mixpinn::config::RunConfig;
use mixpinn::network::Variant;
use mixpinn::pipeline::{self, Overrides};
use mixpinn::Error;

#[derive(Parser, Debug)]
#[command(name = "mixpinn", version, about = "Mixed-formulation PINN and FEM solver for heterogeneous 2-D solids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Replace the configured seeds with this one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Model variant A-E.
    #[arg(long, global = true)]
    variant: Option<Variant>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train and evaluate the network solver.
    SolvePinn { config: PathBuf },
    /// Solve with the finite-element reference.
    SolveFem { config: PathBuf },
    /// Relative differences between two field CSV files (second is the reference).
    Compare { a: PathBuf, b: PathBuf },
    /// Collocation-count sweep for the 1-D benchmark.
    OdeBench { config: PathBuf },
    /// Write the training points without training.
    SamplePoints { config: PathBuf },
}

fn load(path: &Path, cli: &Cli) -> mixpinn::Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    Overrides {
        seed: cli.seed,
        epochs: cli.epochs,
        variant: cli.variant,
    }
    .apply(&mut cfg)?;
    Ok(cfg)
}

fn run(cli: &Cli) -> mixpinn::Result<()> {
    let out = &cli.out_dir;
    match &cli.command {
        Command::SolvePinn { config } => {
            let runs = pipeline::solve_pinn_to_dir(&load(config, cli)?, out)?;
            for r in runs {
                let last = r.record.last().map_or(f64::NAN, |e| e.total);
                println!("seed {}: {} epochs, final loss {last:.6e}", r.seed, r.record.len());
            }
        }
        Command::SolveFem { config } => {
            let g = pipeline::solve_fem_to_dir(&load(config, cli)?, out)?;
            println!("fem field with {} points written to {}", g.len(), out.display());
        }
        Command::Compare { a, b } => {
            let report = pipeline::compare_files(a, b, out)?;
            print!("{}", report.to_csv());
        }
        Command::OdeBench { config } => {
            let table = pipeline::ode_bench_to_dir(&load(config, cli)?, out)?;
            for c in &table.cells {
                println!("count {:>4} order {}: mean MAE {:.4e} std {:.4e}", c.count, c.order, c.mean, c.std);
            }
        }
        Command::SamplePoints { config } => {
            let sets = pipeline::sample_points_to_dir(&load(config, cli)?, out)?;
            for s in sets {
                println!("{} points ({} interior)", s.len(), s.n_interior());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            match e {
                Error::Training { .. } | Error::Solver(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
