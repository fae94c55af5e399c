//! `harcascade`: the cascade training and evaluation pipeline as subcommands.
//!
//! Each subcommand reads the artifacts of the previous steps from the output
//! directory and writes its own; all of them are stamped with the hash of
//! the resolved run configuration.

mod artifacts;
mod commands;
mod config;

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use harcascade::exec::{with_jobs, Execution};

use commands::Ctx;
use config::{DataSource, RunConfig};

#[derive(Parser)]
#[command(name = "harcascade", version, about = "Decision-tree / CNN cascade for activity recognition")]
struct Cli {
    /// Run configuration (TOML). Defaults to `<out>/config.toml` when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for every artifact.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the parallel stages (1 runs sequentially).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Window a dataset into train / test caches.
    Prepare {
        /// HAPT root (the extracted download or its RawData directory).
        #[arg(long, conflicts_with = "synth")]
        hapt: Option<PathBuf>,
        /// File listing the HAPT test subject ids.
        #[arg(long, requires = "hapt")]
        split: Option<PathBuf>,
        /// Synthetic preset name.
        #[arg(long)]
        synth: Option<String>,
    },
    /// Full-task tree search and easy-class selection.
    Decompose,
    /// Easy-vs-fallback tree search.
    TrainDt,
    /// Train the CNN templates on the hard classes and on all classes.
    SweepCnn {
        /// Print the configuration matrix without training.
        #[arg(long)]
        dry_run: bool,
        /// Also run the random-forest baseline grid.
        #[arg(long)]
        forest: bool,
    },
    /// Pair the tree with the validation-Pareto CNNs and evaluate all points.
    BuildCascade,
    /// Evaluate a cascade on the test set.
    Evaluate {
        /// Cascade artifact; defaults to `<out>/best_cascade.json`.
        #[arg(long)]
        cascade: Option<PathBuf>,
        /// Repeat the easy-class test windows N times (may be given more than once).
        #[arg(long)]
        oversample: Vec<usize>,
    },
    /// Pareto plot data from the assembled points.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Prepare { .. } => "prepare",
            Command::Decompose => "decompose",
            Command::TrainDt => "train-dt",
            Command::SweepCnn { .. } => "sweep-cnn",
            Command::BuildCascade => "build-cascade",
            Command::Evaluate { .. } => "evaluate",
            Command::Report => "report",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.out)?;
    if let Some(seed) = cli.seed {
        cfg.sweep.seed = seed;
    }
    if let Command::Prepare { hapt, split, synth } = &cli.command {
        match (hapt, synth) {
            (Some(root), _) => cfg.data = DataSource::Hapt { root: root.clone(), split: split.clone() },
            (None, Some(preset)) => {
                DataSource::synth_spec(preset, None, None)?;
                let (train_count, test_count) = match &cfg.data {
                    DataSource::Synth { train_count, test_count, .. } => (*train_count, *test_count),
                    DataSource::Hapt { .. } => (None, None),
                };
                cfg.data = DataSource::Synth { preset: preset.clone(), train_count, test_count };
            }
            (None, None) => {}
        }
    }
    Ok(cfg)
}

/// Timestamps live only here, so every other artifact is reproducible.
fn log_run(out: &Path, command: &str, hash: &str, ok: bool) {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    if std::fs::create_dir_all(out).is_err() {
        return;
    }
    if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(out.join("run.log")) {
        let _ = writeln!(f, "{secs} {command} config={hash} {}", if ok { "ok" } else { "failed" });
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli)?;
    if cli.jobs == Some(0) {
        bail!("--jobs must be at least 1");
    }
    let exec = if cli.jobs == Some(1) { Execution::Sequential } else { Execution::Parallel };
    let ctx = Ctx::new(cfg, &cli.out, exec)?;
    let name = cli.command.name();
    let log = !matches!(cli.command, Command::SweepCnn { dry_run: true, .. });
    let out = cli.out.clone();
    let result = with_jobs(cli.jobs, || match cli.command {
        Command::Prepare { .. } => commands::prepare(&ctx),
        Command::Decompose => commands::decompose(&ctx),
        Command::TrainDt => commands::train_dt(&ctx),
        Command::SweepCnn { dry_run, forest } => commands::sweep_cnn(&ctx, dry_run, forest),
        Command::BuildCascade => commands::build_cascade(&ctx),
        Command::Evaluate { cascade, oversample } => commands::evaluate(&ctx, cascade, &oversample),
        Command::Report => commands::report(&ctx),
    });
    if log {
        log_run(&out, name, &ctx.hash, result.is_ok());
    }
    result
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
