//! Experiment runner: resolves a configuration, runs one experiment and writes its report,
//! plot-ready CSV tables and a manifest to the output directory.

pub mod args;
pub mod config;
pub mod experiments;
pub mod plot;

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

pub use args::Cli;
pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use experiments::{emit_plot_data, run_experiment, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FAILED: i32 = 3;

/// Caps the worker pool.
pub const THREADS_ENV: &str = "MIXLAB_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub output: PathBuf,
    /// File names written inside `output`, in write order.
    pub artifacts: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.pass {
            EXIT_OK
        } else {
            EXIT_FAILED
        }
    }
}

/// Worker count from [`THREADS_ENV`], if set.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "{THREADS_ENV}={v} is not a positive integer"
            ))),
        },
        Err(_) => Ok(None),
    }
}

/// Core constants that shape results but are not configurable.
fn fixed_parameters() -> serde_json::Value {
    use mixlab::{counterexample as cx, flow, metrics, regularity};
    json!({
        "quadrature": regularity::QuadSpec::default(),
        "quadrature_check_stride": regularity::CHECK_STRIDE,
        "verdict_converging_band": regularity::CONVERGING_BAND,
        "verdict_diverging_ratio": regularity::DIVERGING_RATIO,
        "fit_round_off_floor": metrics::ROUND_OFF_FLOOR,
        "holder_checkpoints_per_segment": flow::CHECKPOINTS_PER_SEGMENT,
        "no_rate_ball_average_min": cx::BALL_AVERAGE_MIN,
        "no_rate_geometric_kappa": cx::GEOMETRIC_KAPPA,
        "no_rate_late_steps": cx::LATE_STEPS,
    })
}

fn write(
    dir: &Path,
    name: &str,
    contents: &str,
    artifacts: &mut Vec<String>,
) -> Result<(), CliError> {
    std::fs::write(dir.join(name), contents)
        .map_err(|e| CliError::Runtime(format!("writing {name}: {e}")))?;
    artifacts.push(name.to_string());
    Ok(())
}

fn pretty<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Runs the configured experiment and writes `report.json`, the plot tables and `manifest.json`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let kind = config.kind()?;
    config.validate()?;
    let report = match thread_cap()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(|| run_experiment(kind, config))?,
        None => run_experiment(kind, config)?,
    };
    let dir = config.experiment.output.clone();
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", dir.display())))?;
    let mut artifacts = Vec::new();
    write(&dir, "report.json", &pretty(&report)?, &mut artifacts)?;
    for table in emit_plot_data(&report) {
        write(&dir, &table.file, &table.to_csv(), &mut artifacts)?;
    }
    let manifest = json!({
        "tool": "mixlab",
        "version": env!("CARGO_PKG_VERSION"),
        "kind": kind,
        "pass": report.pass,
        "exit_code": if report.pass { EXIT_OK } else { EXIT_FAILED },
        "config": config,
        "fixed": fixed_parameters(),
        "artifacts": artifacts,
    });
    write(&dir, "manifest.json", &pretty(&manifest)?, &mut artifacts)?;
    Ok(RunOutcome {
        report,
        output: dir,
        artifacts,
    })
}

/// Parses `args`, runs, prints a summary and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = cli.resolve().and_then(|c| run(&c));
    match outcome {
        Ok(o) => {
            for c in &o.report.checks {
                println!(
                    "{} {}: {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            println!("{} -> {}", o.report.kind.name(), o.output.display());
            o.exit_code()
        }
        Err(e) => {
            eprintln!("mixlab: {e}");
            e.exit_code()
        }
    }
}
