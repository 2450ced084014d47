use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use aqml::config::{ExperimentConfig, Subcommand};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Qpca,
    Boost,
    Kmeans,
    Verify,
}

/// Runs an aqml experiment or the acceptance suite.
#[derive(Debug, Parser)]
#[command(name = "aqml", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, default `out/<command>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cmd = match args.command {
        Command::Qpca => Subcommand::Qpca,
        Command::Boost => Subcommand::Boost,
        Command::Kmeans => Subcommand::Kmeans,
        Command::Verify => Subcommand::Verify,
    };
    match run(cmd, &args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Subcommand, args: &Args) -> anyhow::Result<bool> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cmd.name()));
    let report = aqml::dispatch(cmd, &cfg)?;
    aqml::write_artifacts(&out, cmd, &cfg, &report)?;
    print!("{}", aqml::render_summary(cmd, &cfg, &report)?);
    println!("artifacts in {}", out.display());
    Ok(report.ok())
}
