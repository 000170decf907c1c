use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use streamld::datagen::{generate, DatasetSpec};
use streamld::experiment::{
    audit_dir, evaluate_dir, figure_to_dir, run_to_dir, ExperimentConfig, FigureConfig, Profile,
};
use streamld::{Error, Result};

/// Streaming posterior sampling experiments.
#[derive(Parser)]
#[command(name = "streamld", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Replaces the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (CSV plus a `.json` sidecar).
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Run replicated chains and write a run directory.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replicas: Option<usize>,
        /// theory, paper-sim or explicit; SAGA samplers only.
        #[arg(long)]
        profile: Option<Profile>,
        /// Record per-epoch samples and mode distances.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Marginal accuracy of a run against a reference sample.
    Evaluate {
        /// Run directory.
        #[arg(long)]
        run: PathBuf,
        /// Reference CSV; exact posterior draws are used when omitted.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        exact_draws: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the regularity constants from a diagnostic-mode run.
    Audit {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Marginal accuracy of several samplers at the last epoch.
    Figure1 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replicas: Option<usize>,
    },
}

fn emit(value: &impl serde::Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    if let Some(p) = out {
        fs::write(p, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common } => {
            let mut spec: DatasetSpec = serde_json::from_str(&fs::read_to_string(&common.config)?)?;
            if let Some(s) = common.seed {
                spec.seed = s;
            }
            let out = common.out.unwrap_or_else(|| PathBuf::from("data.csv"));
            let data = generate(&spec)?;
            data.write(&out)?;
            eprintln!("wrote {} rows to {}", data.len(), out.display());
        }
        Command::Run {
            common,
            replicas,
            profile,
            diagnostics,
        } => {
            let mut cfg = ExperimentConfig::load(&common.config)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(r) = replicas {
                cfg.replicas = r;
            }
            if let Some(p) = profile {
                cfg.sampler.set_profile(p)?;
            }
            cfg.diagnostics |= diagnostics;
            cfg.validate()?;
            let out = common
                .out
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}", cfg.sampler.name(), cfg.seed)));
            let manifest = run_to_dir(&cfg, &out)?;
            eprintln!(
                "{} replicas of {} over {} epochs: {} gradient evaluations -> {}",
                manifest.replicas,
                manifest.sampler,
                manifest.epochs,
                manifest.grad_evals_total,
                out.display()
            );
        }
        Command::Evaluate {
            run,
            reference,
            exact_draws,
            out,
        } => emit(&evaluate_dir(&run, reference.as_deref(), exact_draws)?, out.as_deref())?,
        Command::Audit { run, out } => {
            let report = audit_dir(&run)?;
            let out = out.unwrap_or_else(|| run.join("audit_report.json"));
            emit(&report, Some(&out))?;
        }
        Command::Figure1 { common, replicas } => {
            let mut cfg = FigureConfig::load(&common.config)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(r) = replicas {
                cfg.replicas = r;
            }
            let out = common.out.unwrap_or_else(|| PathBuf::from("figure1"));
            let result = figure_to_dir(&cfg, &out)?;
            println!("{:<16} {:>8} {:>8}", "sampler", "mean", "sd");
            for s in &result.summary {
                println!("{:<16} {:>8.3} {:>8.3}", s.sampler, s.mean, s.sd);
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else if e.is_divergence() {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
