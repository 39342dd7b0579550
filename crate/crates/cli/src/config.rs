//! Experiment configuration: a sectioned `key = value` file (TOML) plus command-line overrides.

use std::path::{Path, PathBuf};

use mixlab::stream::ALPHA_STAR;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    VerifyLemmas,
    MixDecay,
    FlowVsMap,
    PeriodCheck,
    RegularityProbe,
    HolderProbe,
    NoRateDemo,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::VerifyLemmas,
        Self::MixDecay,
        Self::FlowVsMap,
        Self::PeriodCheck,
        Self::RegularityProbe,
        Self::HolderProbe,
        Self::NoRateDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::VerifyLemmas => "verify-lemmas",
            Self::MixDecay => "mix-decay",
            Self::FlowVsMap => "flow-vs-map",
            Self::PeriodCheck => "period-check",
            Self::RegularityProbe => "regularity-probe",
            Self::HolderProbe => "holder-probe",
            Self::NoRateDemo => "no-rate-demo",
        }
    }
}

/// The discrete map, which also fixes the velocity protocol realising it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapVariant {
    /// Folded baker's map on the square; `box_2d` protocol.
    T,
    /// `T` acting on every coordinate plane of the `dim`-cube; `box_d` protocol.
    #[serde(rename = "T_d")]
    Td,
    /// Torus map; `torus_2d` protocol.
    #[serde(rename = "T'")]
    TPrime,
    #[serde(rename = "T'_d")]
    TPrimeD,
    /// Baker's map conjugated by the quarter turn; `box_rotated` protocol.
    #[serde(rename = "rotated")]
    Rotated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    HalfSplit,
    Checkerboard,
    Spectral,
    Trig,
}

/// Series whose decay is fitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitNorm {
    #[serde(rename = "mix_norm")]
    MixNorm,
    /// Needs the torus.
    #[serde(rename = "h_m12")]
    HMinusHalf,
}

impl FitNorm {
    pub fn name(self) -> &'static str {
        match self {
            Self::MixNorm => "mix_norm",
            Self::HMinusHalf => "h_m12",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    /// `λ_n = 2^{-n}`.
    Pow2,
    /// `λ_n = e^{-decay·n}`.
    Exponential,
    Constant,
    /// Explicit `rates`, indexed from `n = 1`.
    List,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Corner,
    Interior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub kind: Option<ExperimentKind>,
    pub output: PathBuf,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            kind: None,
            output: PathBuf::from("mixlab-out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub map: MapVariant,
    pub dim: usize,
    pub alpha: f64,
    /// Samples of the period table behind every protocol.
    pub table_samples: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            map: MapVariant::T,
            dim: 2,
            alpha: ALPHA_STAR,
            table_samples: mixlab::stream::DEFAULT_TABLE_SAMPLES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// `2^n` cells per axis.
    pub n: u32,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub init: InitKind,
    pub sigma: f64,
    pub seed: u64,
    pub cutoff: Option<u32>,
    /// Checkerboard level.
    pub k: u32,
    /// Wave vector of the trigonometric mode.
    pub mode: Vec<i64>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            init: InitKind::Spectral,
            sigma: 1.0,
            seed: 1,
            cutoff: None,
            k: 2,
            mode: vec![1, 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixingSection {
    /// Rows `t = 1, …, steps`.
    pub steps: usize,
    pub kappas: Vec<f64>,
    /// Fitted series; values at or below `1e-12` of its maximum end the fitted window.
    pub norm: FitNorm,
    /// Fixed burn-in; otherwise the smallest one `≤ max_burn_in` after which the series decreases.
    pub burn_in: Option<usize>,
    pub max_burn_in: usize,
    pub max_slope: f64,
    pub min_r2: f64,
}

impl Default for MixingSection {
    fn default() -> Self {
        Self {
            steps: 16,
            kappas: vec![1.0 / 3.0],
            norm: FitNorm::MixNorm,
            burn_in: None,
            max_burn_in: 4,
            max_slope: -0.05,
            min_r2: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaSection {
    pub kmax: u32,
    pub kprime_max: u32,
    pub lmax: u32,
    /// Equidistribution of cube pairs is checked for `k = 1, …, equidistribution_kmax`.
    pub equidistribution_kmax: u32,
}

impl Default for LemmaSection {
    fn default() -> Self {
        Self {
            kmax: 5,
            kprime_max: 5,
            lmax: 5,
            equidistribution_kmax: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    /// Integrator tolerance.
    pub tol: f64,
    pub clamp: f64,
    pub max_steps: usize,
    pub samples_per_axis: usize,
    pub margin: f64,
    pub periods: u32,
    pub max_error: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            clamp: 0.25,
            max_steps: 1_000_000,
            samples_per_axis: 32,
            margin: 1.0 / 32.0,
            periods: 1,
            max_error: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeriodSection {
    /// Levels where the coarea and orbit estimators are compared.
    pub levels: Vec<f64>,
    pub agreement_tol: f64,
    /// Levels whose orbits under the stream velocity are timed.
    pub return_levels: Vec<f64>,
    pub return_tol: f64,
    /// Level standing in for the limit at the maximum.
    pub limit_level: f64,
    pub limit_tol: f64,
}

impl Default for PeriodSection {
    fn default() -> Self {
        Self {
            levels: (1..=19).map(|i| i as f64 / 20.0).collect(),
            agreement_tol: 5e-3,
            return_levels: (1..=9).map(|i| i as f64 / 10.0).collect(),
            return_tol: 1e-3,
            limit_level: 0.999,
            limit_tol: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularitySection {
    pub gamma: f64,
    pub p: Vec<f64>,
    pub resolutions: Vec<u32>,
    /// Expected verdict per `p`; empty means record only.
    pub expect: Vec<String>,
}

impl Default for RegularitySection {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            p: vec![1.05, 1.3],
            resolutions: vec![7, 8, 9],
            expect: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HolderSection {
    pub region: Region,
    pub scales: Vec<u32>,
    pub min_beta: f64,
    pub require_stable: bool,
}

impl Default for HolderSection {
    fn default() -> Self {
        Self {
            region: Region::Corner,
            scales: (6..=11).collect(),
            min_beta: 0.0,
            require_stable: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleSection {
    pub rate: RateKind,
    pub decay: f64,
    pub value: f64,
    pub rates: Vec<f64>,
    /// `n_j = j + offset`, unless `times` is given.
    pub offset: usize,
    pub times: Vec<usize>,
    pub terms: usize,
    pub j_max: usize,
    pub samples_per_axis: usize,
    pub center: Option<Vec<f64>>,
}

impl Default for CounterexampleSection {
    fn default() -> Self {
        Self {
            rate: RateKind::Pow2,
            decay: 1.0,
            value: 0.5,
            rates: Vec::new(),
            offset: 3,
            times: Vec::new(),
            terms: 3,
            j_max: 3,
            samples_per_axis: 4,
            center: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub model: ModelSection,
    pub grid: GridSection,
    pub data: DataSection,
    pub mixing: MixingSection,
    pub lemmas: LemmaSection,
    pub flow: FlowSection,
    pub period: PeriodSection,
    pub regularity: RegularitySection,
    pub holder: HolderSection,
    pub counterexample: CounterexampleSection,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("{source_name}:{line}:{column}: {message}")]
    At {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
}

/// 1-based line and column of a byte offset.
pub fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let start = before.rfind('\n').map_or(0, |i| i + 1);
    (line, before[start..].chars().count() + 1)
}

fn located(source_name: &str, text: &str, e: toml::de::Error) -> ConfigError {
    let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
    ConfigError::At {
        source_name: source_name.to_string(),
        line,
        column,
        message: e.message().trim().to_string(),
    }
}

/// A `section.key = value` assignment from the command line.
#[derive(Clone, Debug, PartialEq)]
pub struct Override {
    pub key: String,
    pub value: toml::Value,
    /// Where it came from, for diagnostics.
    pub origin: String,
}

impl Override {
    pub fn new(
        key: impl Into<String>,
        value: impl Into<toml::Value>,
        origin: impl Into<String>,
    ) -> Self {
        Self {
            key: key.into(),
            value: value.into(),
            origin: origin.into(),
        }
    }

    /// Parses `section.key=value`, reading the value as TOML and falling back to a bare string.
    pub fn parse_assignment(s: &str) -> Result<Self, ConfigError> {
        let (key, raw) = s.split_once('=').ok_or_else(|| {
            ConfigError::Invalid(format!("--set {s}: expected section.key=value"))
        })?;
        let key = key.trim();
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        Ok(Self::new(key, value, format!("--set {s}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| located(source_name, text, e))
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = read(path)?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// The file at `path` (if any) with `overrides` applied in order, validated as a whole.
    pub fn resolve(path: Option<&Path>, overrides: &[Override]) -> Result<Self, ConfigError> {
        let (text, name) = match path {
            Some(p) => (read(p)?, p.display().to_string()),
            None => (String::new(), "<defaults>".to_string()),
        };
        Self::from_toml_str(&text, &name)?;
        let mut table: toml::Table = text.parse().map_err(|e| located(&name, &text, e))?;
        for o in overrides {
            let (section, key) = o.key.split_once('.').ok_or_else(|| {
                ConfigError::Invalid(format!("{}: key {} must be section.key", o.origin, o.key))
            })?;
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(sec) = entry else {
                return Err(ConfigError::Invalid(format!(
                    "{}: {section} is not a section",
                    o.origin
                )));
            };
            sec.insert(key.to_string(), o.value.clone());
        }
        let config: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| {
                let culprit = overrides
                    .iter()
                    .map(|o| o.origin.as_str())
                    .collect::<Vec<_>>()
                    .join(", ");
                ConfigError::Invalid(format!("{} (overrides: {culprit})", e.message().trim()))
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn kind(&self) -> Result<ExperimentKind, ConfigError> {
        self.experiment
            .kind
            .ok_or_else(|| ConfigError::Invalid("experiment.kind is not set".into()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(2..=3).contains(&self.model.dim) {
            return bad(format!("model.dim = {} must be 2 or 3", self.model.dim));
        }
        if matches!(
            self.model.map,
            MapVariant::T | MapVariant::TPrime | MapVariant::Rotated
        ) && self.model.dim != 2
        {
            return bad(format!(
                "model.map = {:?} is planar but model.dim = {}",
                self.model.map, self.model.dim
            ));
        }
        if !(self.model.alpha > 0.0 && self.model.alpha < 1.0) {
            return bad(format!("model.alpha = {} outside (0, 1)", self.model.alpha));
        }
        if !(1..=14).contains(&self.grid.n) {
            return bad(format!("grid.n = {} outside 1..=14", self.grid.n));
        }
        if self.mixing.kappas.iter().any(|k| !(*k > 0.0 && *k < 1.0)) {
            return bad(format!(
                "mixing.kappas {:?} must lie in (0, 1)",
                self.mixing.kappas
            ));
        }
        if self.mixing.norm == FitNorm::HMinusHalf
            && !matches!(self.model.map, MapVariant::TPrime | MapVariant::TPrimeD)
        {
            return bad("mixing.norm = \"h_m12\" needs a torus map (T' or T'_d)".into());
        }
        if !(self.flow.tol > 0.0) || !(self.flow.max_error > 0.0) {
            return bad("flow.tol and flow.max_error must be positive".into());
        }
        for v in &self.regularity.expect {
            if !matches!(v.as_str(), "converging" | "diverging" | "inconclusive") {
                return bad(format!("regularity.expect: unknown verdict {v:?}"));
            }
        }
        if !self.regularity.expect.is_empty()
            && self.regularity.expect.len() != self.regularity.p.len()
        {
            return bad("regularity.expect needs one verdict per entry of regularity.p".into());
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_and_column_are_one_based() {
        let text = "a = 1\nbb = 2\n";
        assert_eq!(line_column(text, 0), (1, 1));
        assert_eq!(line_column(text, 6), (2, 1));
        assert_eq!(line_column(text, 9), (2, 4));
    }

    #[test]
    fn unknown_key_is_located() {
        let text = "[grid]\nn = 8\n\n[mixing]\nstepz = 3\n";
        match ExperimentConfig::from_toml_str(text, "x.toml") {
            Err(ConfigError::At {
                line,
                column,
                message,
                ..
            }) => {
                assert_eq!((line, column), (5, 1));
                assert!(message.contains("stepz"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_replace_file_values() {
        let o = [
            Override::parse_assignment("grid.n=7").unwrap(),
            Override::parse_assignment("model.map=T'").unwrap(),
        ];
        let c = ExperimentConfig::resolve(None, &o).unwrap();
        assert_eq!(c.grid.n, 7);
        assert_eq!(c.model.map, MapVariant::TPrime);
    }

    #[test]
    fn bad_override_is_rejected() {
        let o = [Override::parse_assignment("grid.m=7").unwrap()];
        assert!(matches!(
            ExperimentConfig::resolve(None, &o),
            Err(ConfigError::Invalid(_))
        ));
    }
}
