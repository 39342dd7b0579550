//! Command-line arguments. Every flag is shorthand for one configuration key and wins over
//! the config file; `--set section.key=value` reaches any key.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, ExperimentKind, Override};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "mixlab",
    version,
    about = "Mixing experiments with dyadic maps and constant-period flows"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact rectangle and equidistribution checks for a dyadic map.
    VerifyLemmas(Flags),
    /// Mixing measures of transported data and a fitted decay rate.
    MixDecay(Flags),
    /// Time-one flow map of a velocity protocol against its discrete map.
    FlowVsMap(Flags),
    /// Level-set periods by two estimators and orbit return times.
    PeriodCheck(Flags),
    /// Fractional Hessian norms of the rescaled stream across resolutions.
    RegularityProbe(Flags),
    /// Separation exponent of nearby trajectories.
    HolderProbe(Flags),
    /// Bad initial set that beats a prescribed mixing rate.
    NoRateDemo(Flags),
    /// Runs the experiment named by `experiment.kind` in the config.
    Run(Flags),
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// Sectioned key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory [experiment.output].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Map / protocol: T, T_d, T', T'_d or rotated [model.map].
    #[arg(long)]
    pub variant: Option<String>,
    /// [model.dim]
    #[arg(long)]
    pub dim: Option<i64>,
    /// [model.alpha]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Resolution level, 2^n cells per axis [grid.n].
    #[arg(long)]
    pub n: Option<i64>,
    /// half_split, checkerboard, spectral or trig [data.init].
    #[arg(long)]
    pub init: Option<String>,
    /// [data.sigma]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// [data.seed]
    #[arg(long)]
    pub seed: Option<i64>,
    /// [mixing.steps]
    #[arg(long)]
    pub steps: Option<i64>,
    /// Comma-separated [mixing.kappas].
    #[arg(long, value_delimiter = ',')]
    pub kappa: Vec<f64>,
    /// [lemmas.kmax]
    #[arg(long)]
    pub kmax: Option<i64>,
    /// [flow.tol]
    #[arg(long)]
    pub tol: Option<f64>,
    /// [regularity.gamma]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Comma-separated [regularity.p].
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<f64>,
    /// Comma-separated [regularity.resolutions].
    #[arg(long, value_delimiter = ',')]
    pub resolutions: Vec<i64>,
    /// corner or interior [holder.region].
    #[arg(long)]
    pub region: Option<String>,
    /// Comma-separated [holder.scales].
    #[arg(long, value_delimiter = ',')]
    pub scales: Vec<i64>,
    /// [counterexample.j_max]
    #[arg(long)]
    pub j_max: Option<i64>,
    /// Any key, as section.key=value; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

fn array<T: Into<toml::Value> + Clone>(v: &[T]) -> toml::Value {
    toml::Value::Array(v.iter().cloned().map(Into::into).collect())
}

impl Flags {
    /// Overrides in application order: named flags first, then `--set`.
    pub fn overrides(&self) -> Result<Vec<Override>, CliError> {
        let mut o = Vec::new();
        let mut put = |key: &str, flag: &str, v: toml::Value| {
            o.push(Override::new(key, v, format!("--{flag}")))
        };
        if let Some(v) = &self.out {
            put("experiment.output", "out", v.display().to_string().into());
        }
        if let Some(v) = &self.variant {
            put("model.map", "variant", v.clone().into());
        }
        if let Some(v) = self.dim {
            put("model.dim", "dim", v.into());
        }
        if let Some(v) = self.alpha {
            put("model.alpha", "alpha", v.into());
        }
        if let Some(v) = self.n {
            put("grid.n", "n", v.into());
        }
        if let Some(v) = &self.init {
            put("data.init", "init", v.clone().into());
        }
        if let Some(v) = self.sigma {
            put("data.sigma", "sigma", v.into());
        }
        if let Some(v) = self.seed {
            put("data.seed", "seed", v.into());
        }
        if let Some(v) = self.steps {
            put("mixing.steps", "steps", v.into());
        }
        if !self.kappa.is_empty() {
            put("mixing.kappas", "kappa", array(&self.kappa));
        }
        if let Some(v) = self.kmax {
            put("lemmas.kmax", "kmax", v.into());
        }
        if let Some(v) = self.tol {
            put("flow.tol", "tol", v.into());
        }
        if let Some(v) = self.gamma {
            put("regularity.gamma", "gamma", v.into());
        }
        if !self.p.is_empty() {
            put("regularity.p", "p", array(&self.p));
        }
        if !self.resolutions.is_empty() {
            put(
                "regularity.resolutions",
                "resolutions",
                array(&self.resolutions),
            );
        }
        if let Some(v) = &self.region {
            put("holder.region", "region", v.clone().into());
        }
        if !self.scales.is_empty() {
            put("holder.scales", "scales", array(&self.scales));
        }
        if let Some(v) = self.j_max {
            put("counterexample.j_max", "j-max", v.into());
        }
        for s in &self.set {
            o.push(Override::parse_assignment(s)?);
        }
        Ok(o)
    }
}

impl Cli {
    pub fn flags(&self) -> (&Flags, Option<ExperimentKind>) {
        match &self.command {
            Command::VerifyLemmas(f) => (f, Some(ExperimentKind::VerifyLemmas)),
            Command::MixDecay(f) => (f, Some(ExperimentKind::MixDecay)),
            Command::FlowVsMap(f) => (f, Some(ExperimentKind::FlowVsMap)),
            Command::PeriodCheck(f) => (f, Some(ExperimentKind::PeriodCheck)),
            Command::RegularityProbe(f) => (f, Some(ExperimentKind::RegularityProbe)),
            Command::HolderProbe(f) => (f, Some(ExperimentKind::HolderProbe)),
            Command::NoRateDemo(f) => (f, Some(ExperimentKind::NoRateDemo)),
            Command::Run(f) => (f, None),
        }
    }

    /// The config file with the subcommand's kind and every flag applied.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let (flags, kind) = self.flags();
        let mut overrides = Vec::new();
        if let Some(k) = kind {
            overrides.push(Override::new("experiment.kind", k.name(), k.name()));
        }
        overrides.extend(flags.overrides()?);
        let config = ExperimentConfig::resolve(flags.config.as_deref(), &overrides)?;
        config.kind()?;
        Ok(config)
    }
}
