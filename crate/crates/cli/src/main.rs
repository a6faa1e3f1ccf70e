mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seqrb::reverse::DataOption;

use crate::config::RunConfig;
use crate::error::CliError;

/// Design, simulate and analyse group-sequential multi-arm trials.
#[derive(Debug, Parser)]
#[command(name = "seqrb", version)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Simulated trials per scenario.
    #[arg(long, global = true)]
    replicates: Option<u64>,
    /// Reverse simulations per RB2 analysis.
    #[arg(long, global = true)]
    reverse_replicates: Option<u64>,
    /// Estimators to run; repeat or comma-separate.
    #[arg(long, global = true, value_delimiter = ',',
          value_parser = ["naive", "orderings", "rb1", "rb2"])]
    method: Vec<String>,
    /// Data used for multi-arm comparisons: 1 all data, 2 common interims.
    #[arg(long, global = true, value_parser = ["1", "2"])]
    option: Option<String>,
    #[arg(long, global = true, env = "SEQRB_THREADS")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Error rates, expected information and no-difference feasibility.
    DesignCheck,
    /// Simulate trials and write each record.
    Simulate,
    /// Operating characteristics of each scenario.
    Oc,
    /// Bias and coverage of the estimators over simulated trials.
    Study,
    /// Analyse a trial record.
    Analyze { record: Option<PathBuf> },
    /// Boundary diagram, plus an estimator comparison for report files.
    Plot { reports: Vec<PathBuf> },
}

fn settings(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(r) = cli.replicates {
        cfg.simulate.replicates = r;
        cfg.oc.replicates = r;
        cfg.study.replicates = r;
    }
    if let Some(r) = cli.reverse_replicates {
        cfg.analysis.rb2.replicates = r;
    }
    if !cli.method.is_empty() {
        cfg.analysis.methods = cli.method.clone();
    }
    match cli.option.as_deref() {
        Some("1") => cfg.analysis.rb2.option = DataOption::Option1,
        Some(_) => cfg.analysis.rb2.option = DataOption::Option2,
        None => {}
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.analysis.rb2.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<commands::Output, CliError> {
    let cfg = settings(&cli)?;
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    match cli.command {
        Command::DesignCheck => commands::design_check(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::Oc => commands::oc(&cfg),
        Command::Study => commands::study(&cfg),
        Command::Analyze { record } => commands::analyze(&cfg, record),
        Command::Plot { reports } => commands::plot_cmd(&cfg, &reports),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{}", out.text);
            for w in out.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
