//! Config-driven experiment runner for `ottoforge-core`.

pub mod config;
pub mod experiments;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Parser;

pub use config::{parse_config, ConfigError, Experiment, RunConfig};
pub use experiments::{execute, Outcome};
pub use output::{emit_csv, Cell, Table};

#[derive(Debug, Clone, Parser)]
#[command(name = "ottoforge", version, about = "Finite-time quantum Otto engine experiments")]
pub struct Args {
    /// Run configuration file.
    pub config: PathBuf,
    /// Worker threads for grid points (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory, overriding `run.output`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Integrator step, overriding `engine.dt`.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Emit heat and work columns with the first-law residual.
    #[arg(long)]
    pub audit: bool,
    /// Single stroke time, overriding `engine.t_tilde` and `grid.t_tilde`.
    #[arg(long = "t-tilde")]
    pub t_tilde: Option<f64>,
}

/// Loads the config named by `args` and applies the command-line overrides.
pub fn load(args: &Args) -> Result<RunConfig> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read config {}", args.config.display()))?;
    let mut cfg = parse_config(&text).with_context(|| format!("invalid config {}", args.config.display()))?;
    if let Some(dir) = &args.output {
        cfg = cfg.with_override("run", "output", &dir.to_string_lossy())?;
    }
    if let Some(dt) = args.dt {
        cfg = cfg.with_override("engine", "dt", &dt.to_string())?;
    }
    if args.audit {
        cfg = cfg.with_override("run", "audit", "true")?;
    }
    if let Some(t) = args.t_tilde {
        cfg = cfg.with_override("engine", "t_tilde", &t.to_string())?;
        if cfg.grid.t_tilde.is_some() {
            cfg = cfg.with_override("grid", "t_tilde", &t.to_string())?;
        }
    }
    Ok(cfg)
}

pub fn manifest(cfg: &RunConfig, outcome: &Outcome, wall_time: f64) -> String {
    let mut text = String::from("# ottoforge run manifest\n");
    let mut line = |key: &str, value: &str| text.push_str(&format!("# {key} = {value}\n"));
    line("version", env!("CARGO_PKG_VERSION"));
    line("experiment", cfg.experiment.name());
    line("dt", &cfg.engine.dt.to_string());
    line("wall_time_s", &format!("{wall_time:.3}"));
    for (key, value) in &outcome.summary {
        line(key, value);
    }
    text.push('\n');
    text.push_str(&cfg.document.render());
    text
}

/// Runs the experiment and writes `results.csv` and `manifest.txt` into
/// the configured output directory, which is returned.
pub fn run_config(cfg: &RunConfig, jobs: Option<usize>) -> Result<PathBuf> {
    let Some(dir) = cfg.output.clone() else {
        bail!("no output directory: set run.output or pass --output");
    };
    let start = Instant::now();
    let outcome = match jobs {
        Some(threads) => {
            if threads == 0 {
                bail!("--jobs must be at least 1");
            }
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
            pool.install(|| execute(cfg))?
        }
        None => execute(cfg)?,
    };
    write_outputs(&dir, cfg, &outcome, start.elapsed().as_secs_f64())?;
    log::info!(
        "{}: {} rows written to {}",
        cfg.experiment.name(),
        outcome.table.rows.len(),
        dir.display()
    );
    Ok(dir)
}

fn write_outputs(dir: &Path, cfg: &RunConfig, outcome: &Outcome, wall_time: f64) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let results = dir.join("results.csv");
    emit_csv(&outcome.table, &results).with_context(|| format!("cannot write {}", results.display()))?;
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest(cfg, outcome, wall_time)).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn run(args: &Args) -> Result<PathBuf> {
    let cfg = load(args)?;
    run_config(&cfg, args.jobs)
}
