//! Experiment runner for `aqml-core`: TOML configs, seeded pipelines,
//! versioned CSV output and the acceptance suite.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod output;

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use config::{ExperimentConfig, Subcommand};
use experiments::Report;

/// Environment variable that sizes the worker pool.
pub const WORKERS_ENV: &str = "AQML_WORKERS";

/// Runs `f` on a pool sized by `AQML_WORKERS` when it is set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("{WORKERS_ENV}={v}"))?;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

/// Validates `cfg` for `cmd`, runs the pipeline and returns its report.
pub fn dispatch(cmd: Subcommand, cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate(cmd)?;
    with_pool(|| match cmd {
        Subcommand::Qpca => experiments::run_qpca(cfg).context("qpca"),
        Subcommand::Boost => experiments::run_boost(cfg).context("boost"),
        Subcommand::Kmeans => experiments::run_kmeans(cfg).context("kmeans"),
        Subcommand::Verify => checks::run_verify(&cfg.verify.criteria, cfg.seed).context("verify"),
    })?
}

/// Summary text: config echo, measured-vs-bound lines, violations.
pub fn render_summary(cmd: Subcommand, cfg: &ExperimentConfig, report: &Report) -> Result<String> {
    let mut s = String::new();
    writeln!(s, "# aqml {}", cmd.name())?;
    writeln!(s, "# config")?;
    for line in toml::to_string(cfg)?.lines() {
        writeln!(s, "#   {line}")?;
    }
    writeln!(s)?;
    for line in &report.summary {
        writeln!(s, "{line}")?;
    }
    if report.ok() {
        writeln!(s, "all asserted bounds held")?;
    } else {
        writeln!(s, "{} bound violation(s):", report.violations.len())?;
        for v in &report.violations {
            writeln!(s, "  {v}")?;
        }
    }
    Ok(s)
}

/// Writes every table and `summary.txt` into `dir`.
pub fn write_artifacts(dir: &Path, cmd: Subcommand, cfg: &ExperimentConfig, report: &Report) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for t in &report.tables {
        t.write_to(dir)?;
    }
    let summary = render_summary(cmd, cfg, report)?;
    std::fs::write(dir.join("summary.txt"), summary).with_context(|| format!("writing summary in {}", dir.display()))
}
