use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cot_harness::config::{BackendChoice, RunConfig};
use cot_harness::cot::SessionStatus;
use cot_harness::pipeline::{self, PipelineError};

#[derive(Parser)]
#[command(name = "cot", version, about = "Chain-of-Time prediction harness")]
struct Cli {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sessions run concurrently.
    #[arg(long, global = true)]
    parallel: Option<usize>,
    /// oracle, remote or replay.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Aggregate per stimulus first, then across stimuli.
    #[arg(long, global = true)]
    two_stage: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render stimulus input frames and manifests into the store.
    GenStimuli,
    /// Execute all sessions of the config.
    Run,
    /// Detect objects in every generated frame and write trajectories.csv.
    Detect,
    /// Compute RMSE, confidence intervals and fits.
    Analyze,
    /// Write the report bundle (CSV + SVG).
    Report,
    /// gen-stimuli, run, detect, analyze and report.
    All,
}

fn load_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = cli.parallel {
        cfg.parallel = p;
    }
    if let Some(b) = &cli.backend {
        cfg.backend.kind = b
            .parse::<BackendChoice>()
            .map_err(|e| PipelineError::Config(cot_harness::config::ConfigError::Invalid(e)))?;
    }
    if cli.two_stage {
        cfg.analysis.aggregate.two_stage = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::GenStimuli => {
            let n = pipeline::gen_stimuli(&cfg)?.len();
            println!("wrote {n} stimuli to {}", cfg.store_dir().display());
        }
        Command::Run => {
            let s = pipeline::run(&cfg)?;
            println!(
                "{} sessions: {} complete, {} de-render failed, {} backend failed, {} invalid; {} backend calls",
                s.sessions.len(),
                s.count(SessionStatus::Complete),
                s.count(SessionStatus::DerenderFailed),
                s.count(SessionStatus::BackendFailed),
                s.count(SessionStatus::Invalid),
                s.calls
            );
            let failed = s.count(SessionStatus::BackendFailed);
            if failed > 0 {
                return Err(PipelineError::BackendFailures { failed, total: s.sessions.len() });
            }
        }
        Command::Detect => {
            let reports = pipeline::detect(&cfg, &cfg.out)?;
            let (found, total) = pipeline::check_coverage(&cfg, &reports)?;
            println!("detected {found}/{total} frames; wrote {}", cfg.out.join("trajectories.csv").display());
        }
        Command::Analyze => {
            let reports = pipeline::detect(&cfg, &cfg.out)?;
            let a = pipeline::analyze(&cfg, &reports)?;
            pipeline::write_analysis(&a, &cfg.out)?;
            for g in a.aggregates.iter().chain(&a.phase) {
                println!(
                    "{:<10} {:<8} {:<7} rmse {:>8.3}  ci [{:.3}, {:.3}]  n {}  invalid {}",
                    g.domain.name(),
                    g.method,
                    g.phase.map_or("", |p| p.name()),
                    g.rmse,
                    g.ci_lo,
                    g.ci_hi,
                    g.n,
                    g.invalid_count
                );
            }
            pipeline::check_coverage(&cfg, &reports)?;
        }
        Command::Report => {
            let reports = pipeline::detect(&cfg, &cfg.out)?;
            let a = pipeline::analyze(&cfg, &reports)?;
            let dir = cfg.out.join("report");
            let files = pipeline::write_report(&cfg, reports, a, &dir)?;
            println!("wrote {} files to {}", files.len(), dir.display());
        }
        Command::All => {
            let s = pipeline::all(&cfg)?;
            println!("{} sessions, {} backend calls; report in {}", s.sessions.len(), s.calls, cfg.out.join("report").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
