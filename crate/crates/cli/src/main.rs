mod commands;
mod config;
mod fail;
mod outputs;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::fail::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "tasknet",
    version,
    about = "Subtask co-occurrence networks from log entries"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML pipeline configuration.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `paths.output`).
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Raw entry file (overrides `paths.corpus`).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Reference article (overrides `paths.article`).
    #[arg(long, global = true)]
    article: Option<PathBuf>,
    /// Parameter catalog table (overrides `paths.catalog`).
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Repeat for more log output on standard error.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus (or networks) with planted communities.
    Synth(commands::SynthArgs),
    /// Parse, clean and tokenize raw entries and compute author experience.
    Ingest,
    /// Fit the TF-IDF + truncated SVD topic model.
    Model(commands::ModelArgs),
    /// Score relevance to the article and tag parameters.
    Filter(commands::FilterArgs),
    /// Build cohort networks from tagged entries.
    Build,
    /// Node, edge, community and hierarchy reports for networks.
    Analyze(commands::AnalyzeArgs),
    /// All change measures between two networks.
    Compare(commands::CompareArgs),
    /// Change of every period network relative to the first.
    Series,
    /// Full pipeline on a provided dataset, reported against published figures.
    Reproduce,
}

fn resolve(global: &Global) -> CliResult<PipelineConfig> {
    let mut config = match &global.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(o) = &global.output {
        config.paths.output = o.clone();
    }
    if config.paths.output.as_os_str().is_empty() {
        config.paths.output = PathBuf::from("tasknet-out");
    }
    for (slot, flag) in [
        (&mut config.paths.corpus, &global.corpus),
        (&mut config.paths.article, &global.article),
        (&mut config.paths.catalog, &global.catalog),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    if let Some(s) = global.seed {
        config.seed = s;
    }
    Ok(config)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.global.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let mut config = resolve(&cli.global)?;
    commands::apply_overrides(&cli.command, &mut config);
    config.validate()?;
    commands::dispatch(&cli.command, &config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tasknet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
