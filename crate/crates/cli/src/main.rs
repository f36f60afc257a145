mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use torus_trace::Error;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "torus-gutzwiller", version, about = "Trace-formula experiments on the quantised 2-torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to TG_THREADS, then the config, then 1.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Eigenvalues per N.
    Spectrum,
    /// Periodic-orbit catalogs per energy.
    Orbits,
    /// Smoothed counting function against the semiclassical sum.
    TraceCheck,
    /// Local eigenvalue bracketing and Bohr–Sommerfeld predictions.
    BsCheck,
    /// Anti-Wick against Weyl quantisation.
    AntiwickCompare,
    /// Poisson summation on the shipped smooth case.
    PoissonCheck,
    /// Propagator traces and the stationary-phase (Van Vleck) comparison.
    Propagator,
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn threads(cli: Option<usize>, cfg: Option<usize>) -> Result<usize, String> {
    if let Some(n) = cli {
        return Ok(n);
    }
    if let Ok(v) = std::env::var("TG_THREADS") {
        return v.trim().parse().map_err(|_| format!("TG_THREADS = {v:?} is not a thread count"));
    }
    Ok(cfg.unwrap_or(1))
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let path = cli.config.ok_or_else(|| Failure::Usage("--config <path> is required".into()))?;
    let cfg = RunConfig::load(&path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let n_threads = threads(cli.threads, cfg.threads).map_err(Failure::Usage)?;
    if n_threads == 0 {
        return Err(Failure::Usage("thread count must be at least 1".into()));
    }
    let out = cli.out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).map_err(Error::from)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n_threads)
        .build()
        .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    let result = pool.install(|| match cli.command {
        Command::Spectrum => commands::spectrum(&cfg, &out),
        Command::Orbits => commands::orbits(&cfg, &out),
        Command::TraceCheck => commands::trace_check(&cfg, &out),
        Command::BsCheck => commands::bs_check(&cfg, &out),
        Command::AntiwickCompare => commands::antiwick_compare(&cfg, &out),
        Command::PoissonCheck => commands::poisson_check(&cfg, &out),
        Command::Propagator => commands::propagator(&cfg, &out),
    });
    Ok(result?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render().to_string().trim().to_string(), 2),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => fail("usage", m, 2),
        Err(Failure::Run(e)) => fail(e.kind(), e.to_string(), 1),
    }
}
