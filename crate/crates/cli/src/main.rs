//! `nttkit`: runs seeded experiment configs and summarizes their output.

mod config;
mod output;
mod report;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info, warn};
use nttkit::Exec;

use config::ExperimentConfig;
use output::{Artifacts, Manifest, Status, RESULTS};

#[derive(Parser)]
#[command(
    name = "nttkit",
    version,
    about = "Riemannian optimization on normalized tensor trains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Worker threads for independent runs.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
        /// Output directory; overrides the config's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a summary of the manifests under a directory.
    Report { dir: PathBuf },
}

const SCHEMA_EXIT: u8 = 2;
const RUNTIME_EXIT: u8 = 1;

fn init_logging() {
    let raw = std::env::var("NTTKIT_LOG").ok();
    let level = match raw.as_deref() {
        None | Some("") => "error",
        Some(l @ ("error" | "info" | "debug")) => l,
        Some(_) => "error",
    };
    env_logger::Builder::new()
        .parse_filters(level)
        .format_timestamp(None)
        .init();
    if let Some(other) = raw.filter(|l| !["", "error", "info", "debug"].contains(&l.as_str())) {
        warn!("ignoring NTTKIT_LOG={other}; expected error, info or debug");
    }
}

fn execute(cfg: &ExperimentConfig, jobs: usize, out_dir: &Path) -> anyhow::Result<bool> {
    let exec = if jobs > 1 {
        Exec::Parallel
    } else {
        Exec::Sequential
    };
    let experiment = &cfg.experiment;
    info!("running {} into {}", experiment.name(), out_dir.display());
    let outcome = with_pool(jobs, || run::run(experiment, exec))?;
    let mut artifacts = Artifacts::create(out_dir)?;
    artifacts.table(RESULTS, &outcome.results)?;
    for (rel, table) in &outcome.files {
        artifacts.table(rel, table)?;
    }
    let failed = outcome.error.is_some();
    artifacts.manifest(Manifest {
        tool: "nttkit".into(),
        version: nttkit::VERSION.into(),
        experiment: experiment.name().into(),
        status: if failed {
            Status::Partial
        } else {
            Status::Complete
        },
        error: outcome.error.clone(),
        seeds: experiment.seeds(),
        jobs,
        config: cfg.raw.clone(),
        headline: outcome.headline,
        files: Vec::new(),
    })?;
    if let Some(e) = outcome.error {
        error!("{} failed: {e}", experiment.name());
    }
    Ok(!failed)
}

#[cfg(feature = "parallel")]
fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    use anyhow::Context;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("cannot start worker pool")?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn with_pool<T: Send>(_jobs: usize, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    Ok(f())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    match cli.command {
        Command::Run { config, jobs, out } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: invalid config {}: {e}", config.display());
                    return ExitCode::from(SCHEMA_EXIT);
                }
            };
            let dir = out
                .or_else(|| cfg.out.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            match execute(&cfg, jobs as usize, &dir) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(RUNTIME_EXIT),
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(RUNTIME_EXIT)
                }
            }
        }
        Command::Report { dir } => match report::report(&dir) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(RUNTIME_EXIT)
            }
        },
    }
}
