use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use hho::adaptivity::RefinementMode;
use hho::benchmarks::BenchmarkName;
use hho::hho::Variant;
use hho_cli::config::{Epsilon, Overrides, RunConfig};
use hho_cli::{runner, THREADS_ENV};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hho",
    version,
    about = "Adaptive hybrid high-order methods for convex minimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Adaptive,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Rt,
    Stabilized,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a benchmark on a sequence of meshes and write the convergence history.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        benchmark: Option<BenchmarkName>,
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        theta: Option<f64>,
        /// A number or `auto`.
        #[arg(long)]
        eps: Option<Epsilon>,
        #[arg(long)]
        max_ndof: Option<usize>,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available benchmarks.
    Benchmarks,
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .with_context(|| format!("{THREADS_ENV} must be a positive integer, got {value:?}"))?;
    anyhow::ensure!(n > 0, "{THREADS_ENV} must be a positive integer");
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Benchmarks => {
            for b in BenchmarkName::ALL {
                println!("{b}");
            }
            Ok(())
        }
        Command::Run {
            config,
            benchmark,
            degree,
            mode,
            theta,
            eps,
            max_ndof,
            variant,
            out,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.apply(Overrides {
                benchmark,
                degree,
                mode: mode.map(|m| match m {
                    ModeArg::Adaptive => RefinementMode::Adaptive,
                    ModeArg::Uniform => RefinementMode::Uniform,
                }),
                theta,
                eps,
                max_ndof,
                variant: variant.map(|v| match v {
                    VariantArg::Rt => Variant::RaviartThomas,
                    VariantArg::Stabilized => Variant::Stabilized,
                }),
                out,
            });
            let outcome = runner::execute(&cfg)?;
            let s = &outcome.summary;
            println!("{} levels, stopped: {}", s.levels, s.stop);
            if let Some(e) = s.extrapolated_energy {
                println!(
                    "extrapolated energy {e:.12e} (reference {:.12e})",
                    s.reference_energy
                );
            }
            for r in &s.rates {
                println!("slope {:<20} {:+.3}", r.quantity, r.slope);
            }
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
