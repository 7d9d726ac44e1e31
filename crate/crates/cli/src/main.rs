use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use overtrade_cli::config::PipelineConfig;
use overtrade_cli::pipeline;
use overtrade_cli::synth;

/// Hourly forum-sentiment indices, excess-turnover metrics, and the
/// regression reports relating them.
#[derive(Parser, Debug)]
#[command(name = "overtrade", version, about)]
struct Args {
    /// Configuration file (flat key = value lines).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. --set micro.window=10 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Shorthand for --set out.dir=...
    #[arg(long, global = true)]
    out_dir: Option<String>,

    /// Shorthand for --set seed=...
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Shorthand for --set threads=...
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every stage in order.
    Run,
    /// Validate and clean the raw posts and trades.
    Ingest,
    /// Score posts and build the hourly sentiment index.
    Sentiment,
    /// Compute slot turnover and excess-turnover series.
    Metrics,
    /// Date bull/bear phases for the configured index series.
    Regimes,
    /// Join everything into the regression panel.
    Panel,
    /// Fit the report grid over the panel.
    Regress,
    /// Descriptive statistics of the panel columns.
    Describe,
    /// Generate a seeded synthetic dataset plus a ready-to-run config.
    Synth,
}

fn effective_config(args: &Args) -> Result<PipelineConfig> {
    let base = match &args.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    let mut overrides: Vec<(String, String)> = Vec::new();
    for item in &args.overrides {
        let (key, value) = item
            .split_once('=')
            .with_context(|| format!("--set {item}: expected KEY=VALUE"))?;
        overrides.push((key.trim().to_string(), value.trim().to_string()));
    }
    if let Some(dir) = &args.out_dir {
        overrides.push(("out.dir".to_string(), dir.clone()));
    }
    if let Some(seed) = args.seed {
        overrides.push(("seed".to_string(), seed.to_string()));
    }
    if let Some(threads) = args.threads {
        overrides.push(("threads".to_string(), threads.to_string()));
    }
    base.apply_overrides(&overrides)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match effective_config(&args) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    let result = match args.command {
        Command::Run => pipeline::run_pipeline(&config),
        Command::Ingest => pipeline::run_ingest(&config).context("stage ingest"),
        Command::Sentiment => pipeline::run_sentiment(&config).context("stage sentiment"),
        Command::Metrics => pipeline::run_metrics(&config).context("stage metrics"),
        Command::Regimes => pipeline::run_regimes(&config).context("stage regimes"),
        Command::Panel => pipeline::run_panel(&config).context("stage panel"),
        Command::Regress => pipeline::run_regress(&config).context("stage regress"),
        Command::Describe => pipeline::run_describe(&config).context("stage describe"),
        Command::Synth => synth::run_synth(&config).context("stage synth"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
