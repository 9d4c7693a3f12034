mod config;
mod error;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::error::CliError;
use crate::output::{Outputs, Provenance};

#[derive(Parser)]
#[command(
    name = "lrscatter",
    version,
    about = "High-energy classical scattering in long-range fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and print the feasibility table without solving.
    Validate(Common),
    /// Run the configured experiment and write its outputs.
    Run(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides the config).
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed for random inputs (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(cmd: &Command) -> Result<(), CliError> {
    let (common, run) = match cmd {
        Command::Validate(c) => (c, false),
        Command::Run(c) => (c, true),
    };
    let loaded = config::load(&common.config)?;
    let cfg = &loaded.config;
    let field = cfg.field.build()?;
    cfg.validate(&field)?;
    let seed = common.seed.or(cfg.seed).unwrap_or(0);
    if let Some(jobs) = common.jobs.or(cfg.jobs) {
        if jobs == 0 {
            return Err(CliError::config("jobs", "must be positive"));
        }
        // fails only if a pool already exists, which keeps the old one
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    if !run {
        let stdout = std::io::stdout();
        let warnings = experiments::feasibility(cfg, &field, seed, &mut stdout.lock())?;
        info!("{} is valid ({warnings} warnings)", loaded.path.display());
        return Ok(());
    }
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let outputs = Outputs::create(&dir, Provenance::new(&loaded.text))?;
    let files = experiments::run(cfg, &field, seed, &outputs)?;
    for f in files {
        println!("{f}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
