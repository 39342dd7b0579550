//! The seven experiments. Each returns a [`Report`] with named checks; the run passes when
//! every check does.

use std::sync::Arc;

use mixlab::counterexample::{
    demonstrate_no_rate, BadSetSpec, NoRateReport, RateSequence, Subsequence,
};
use mixlab::dyadic::{
    baker_t, build_rotated_protocol_map, build_t_d, build_t_prime, build_t_prime_d,
    equidistribution_horizon, verify_equidistribution, verify_rectangle_lemmas, LemmaVariant,
    PiecewiseDyadicAffineMap, VerificationReport,
};
use mixlab::field::{
    generate, pullback_series, Domain, InitialDataSpec, InitialKind, PullbackOptions,
};
use mixlab::flow::{
    flow_map_vs_discrete, holder_probe, interior_samples, FlowComparison, FlowOptions,
    HolderRegion, HolderReport,
};
use mixlab::metrics::{auto_burn_in, rate_fit, MixingReport, RateFit, StepRecord, ROUND_OFF_FLOOR};
use mixlab::regularity::{wsp_probe_multi, QuadSpec, RegularityProbeReport};
use mixlab::stream::{
    orbit_return_time, period_at_max, period_t, psi_alpha_value, PeriodMethod, PeriodTable,
    StreamSpec, StreamVariant, SuperStream, VelocityProtocol,
};
use serde::Serialize;

use crate::config::{
    ExperimentConfig, ExperimentKind, FitNorm, InitKind, MapVariant, RateKind, Region,
};
use crate::plot::{kappa_column, num, opt, PlotTable};
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            detail: detail.into(),
            pass,
        }
    }

    fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value <= bound, format!("{value} <= {bound}"))
    }

    fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value >= bound, format!("{value} >= {bound}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquidistributionRun {
    pub k: u32,
    pub steps: Vec<usize>,
    pub report: VerificationReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaData {
    pub rectangle: VerificationReport,
    pub equidistribution: Vec<EquidistributionRun>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingData {
    pub map: String,
    pub domain: Domain,
    pub initial: StepRecord,
    pub fitted: FitNorm,
    pub burn_in: usize,
    pub fit: Option<RateFit>,
    pub mixing_horizon: Option<usize>,
    pub report: MixingReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelAgreement {
    pub r: f64,
    pub coarea: f64,
    pub orbit: f64,
    pub rel_diff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReturnTime {
    pub r: f64,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodData {
    pub alpha: f64,
    pub table_r: Vec<f64>,
    pub table_t: Vec<f64>,
    pub agreement: Vec<LevelAgreement>,
    pub return_times: Vec<ReturnTime>,
    pub limit_level: f64,
    pub limit_coarea: f64,
    pub limit_exact: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportData {
    Lemmas(LemmaData),
    Mixing(MixingData),
    Flow(FlowComparison),
    Period(PeriodData),
    Regularity(Vec<RegularityProbeReport>),
    Holder(HolderReport),
    NoRate(NoRateReport),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub kind: ExperimentKind,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub data: ReportData,
}

impl Report {
    fn new(kind: ExperimentKind, checks: Vec<Check>, data: ReportData) -> Self {
        Self {
            kind,
            pass: checks.iter().all(|c| c.pass),
            checks,
            data,
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn map_for(c: &ExperimentConfig) -> PiecewiseDyadicAffineMap {
    match c.model.map {
        MapVariant::T => baker_t(),
        MapVariant::Td => build_t_d(c.model.dim),
        MapVariant::TPrime => build_t_prime(),
        MapVariant::TPrimeD => build_t_prime_d(c.model.dim),
        MapVariant::Rotated => build_rotated_protocol_map(),
    }
}

fn domain_for(map: MapVariant) -> Domain {
    match map {
        MapVariant::TPrime | MapVariant::TPrimeD => Domain::Torus,
        _ => Domain::Box,
    }
}

fn table_for(c: &ExperimentConfig) -> Result<Arc<PeriodTable>, CliError> {
    Ok(Arc::new(
        PeriodTable::build(c.model.alpha, c.model.table_samples).map_err(runtime)?,
    ))
}

fn protocol_for(
    c: &ExperimentConfig,
    table: Arc<PeriodTable>,
) -> Result<VelocityProtocol, CliError> {
    let p = match c.model.map {
        MapVariant::T => VelocityProtocol::box_2d(table),
        MapVariant::Td => VelocityProtocol::box_d(c.model.dim, table),
        MapVariant::TPrime => VelocityProtocol::torus_2d(table),
        MapVariant::TPrimeD => VelocityProtocol::torus_d(c.model.dim, table),
        MapVariant::Rotated => VelocityProtocol::box_rotated(table),
    };
    p.map_err(runtime)
}

fn flow_options(c: &ExperimentConfig) -> FlowOptions {
    FlowOptions {
        tol: c.flow.tol,
        clamp: c.flow.clamp,
        max_steps: c.flow.max_steps,
    }
}

pub fn run_experiment(kind: ExperimentKind, c: &ExperimentConfig) -> Result<Report, CliError> {
    match kind {
        ExperimentKind::VerifyLemmas => verify_lemmas(c),
        ExperimentKind::MixDecay => mix_decay(c),
        ExperimentKind::FlowVsMap => flow_vs_map(c),
        ExperimentKind::PeriodCheck => period_check(c),
        ExperimentKind::RegularityProbe => regularity_probe(c),
        ExperimentKind::HolderProbe => holder(c),
        ExperimentKind::NoRateDemo => no_rate(c),
    }
}

fn verify_lemmas(c: &ExperimentConfig) -> Result<Report, CliError> {
    let variant = match c.model.map {
        MapVariant::T => LemmaVariant::T,
        MapVariant::Td => LemmaVariant::Td { d: c.model.dim },
        MapVariant::TPrime => LemmaVariant::TPrime,
        other => {
            return Err(CliError::Config(format!(
                "verify-lemmas supports T, T_d and T', not {other:?}"
            )))
        }
    };
    let l = &c.lemmas;
    let rectangle = verify_rectangle_lemmas(variant, l.kmax, l.kprime_max, l.lmax);
    let mut checks = vec![Check::new(
        format!("rectangle lemmas {}", rectangle.variant),
        rectangle.passed(),
        format!(
            "{} cases, {} failures",
            rectangle.cases_total,
            rectangle.failures.len()
        ),
    )];
    let map = map_for(c);
    let mut equidistribution = Vec::new();
    for k in 1..=l.equidistribution_kmax {
        let Some(h) = equidistribution_horizon(&map, k) else {
            continue;
        };
        let steps = vec![h];
        let report = verify_equidistribution(&map, k, &steps);
        checks.push(Check::new(
            format!("equidistribution k={k} after {h} steps"),
            report.passed(),
            format!(
                "{} pairs, {} failures",
                report.cases_total,
                report.failures.len()
            ),
        ));
        equidistribution.push(EquidistributionRun { k, steps, report });
    }
    Ok(Report::new(
        ExperimentKind::VerifyLemmas,
        checks,
        ReportData::Lemmas(LemmaData {
            rectangle,
            equidistribution,
        }),
    ))
}

fn initial_spec(c: &ExperimentConfig) -> InitialDataSpec {
    let d = &c.data;
    InitialDataSpec::new(match d.init {
        InitKind::HalfSplit => InitialKind::HalfSplit,
        InitKind::Checkerboard => InitialKind::Checkerboard { k: d.k },
        InitKind::Spectral => InitialKind::Spectral {
            sigma: d.sigma,
            seed: d.seed,
            cutoff: d.cutoff,
        },
        InitKind::Trig => InitialKind::TrigMode { k: d.mode.clone() },
    })
}

fn mix_decay(c: &ExperimentConfig) -> Result<Report, CliError> {
    let map = map_for(c);
    let domain = domain_for(c.model.map);
    let grid = generate::<f64>(&initial_spec(c), c.model.dim, c.grid.n, domain).map_err(runtime)?;
    let steps: Vec<usize> = (1..=c.mixing.steps).collect();
    let horizon = equidistribution_horizon(&map, c.grid.n);
    let series = pullback_series(
        &grid,
        &map,
        &steps,
        PullbackOptions {
            mixing_horizon: horizon,
            ..Default::default()
        },
    )
    .map_err(runtime)?;
    let kappas = c.mixing.kappas.clone();
    let initial = StepRecord::measure(0, &grid, &kappas).map_err(runtime)?;
    let mut report = MixingReport::new(kappas);
    for (s, g) in steps.iter().zip(&series) {
        report.push(*s, g).map_err(runtime)?;
    }
    let series: Vec<(f64, f64)> = match c.mixing.norm {
        FitNorm::MixNorm => report.mix_norm_series(),
        FitNorm::HMinusHalf => report
            .records
            .iter()
            .map(|r| (r.step as f64, r.h_minus_half.unwrap_or(f64::NAN)))
            .collect(),
    };
    let max = series.iter().map(|p| p.1).fold(0.0, f64::max);
    let kept = series
        .iter()
        .position(|p| p.1 <= ROUND_OFF_FLOOR * max)
        .unwrap_or(series.len());
    let series = &series[..kept];
    let burn_in = c
        .mixing
        .burn_in
        .unwrap_or_else(|| auto_burn_in(series, c.mixing.max_burn_in));
    let fit = rate_fit(series, burn_in).ok();
    let tail: Vec<f64> = series.iter().skip(burn_in).map(|p| p.1).collect();
    let name = c.mixing.norm.name();
    let mut checks = vec![Check::new(
        format!("{name} decreasing after burn-in"),
        tail.len() >= 2 && tail.windows(2).all(|w| w[1] < w[0]),
        format!(
            "burn-in {burn_in} of at most {}, {} points above round-off",
            c.mixing.max_burn_in,
            series.len()
        ),
    )];
    match fit {
        Some(RateFit { slope, r2, .. }) => {
            checks.push(Check::at_most(
                format!("{name} fitted slope"),
                slope,
                c.mixing.max_slope,
            ));
            checks.push(Check::at_least(
                format!("{name} fit r2"),
                r2,
                c.mixing.min_r2,
            ));
        }
        None => checks.push(Check::new(
            format!("{name} rate fit"),
            false,
            "too few positive points after burn-in",
        )),
    }
    let data = MixingData {
        map: map.label.clone(),
        domain,
        initial,
        fitted: c.mixing.norm,
        burn_in,
        fit,
        mixing_horizon: horizon,
        report,
    };
    Ok(Report::new(
        ExperimentKind::MixDecay,
        checks,
        ReportData::Mixing(data),
    ))
}

fn flow_vs_map(c: &ExperimentConfig) -> Result<Report, CliError> {
    let map = map_for(c);
    let protocol = protocol_for(c, table_for(c)?)?;
    let opts = flow_options(c);
    let t = c.flow.periods as f64 * protocol.period;
    let (per, margin) = (c.flow.samples_per_axis, c.flow.margin);
    let cmp = if c.model.dim == 3 {
        flow_map_vs_discrete(
            &protocol,
            &map,
            t,
            &interior_samples::<3>(per, margin),
            &opts,
        )
    } else {
        flow_map_vs_discrete(
            &protocol,
            &map,
            t,
            &interior_samples::<2>(per, margin),
            &opts,
        )
    }
    .map_err(runtime)?;
    let checks = vec![
        Check::at_most("max flow-map error", cmp.max_error, c.flow.max_error),
        Check::at_most(
            "max integrator error estimate",
            cmp.max_integrator_error,
            c.flow.tol,
        ),
    ];
    Ok(Report::new(
        ExperimentKind::FlowVsMap,
        checks,
        ReportData::Flow(cmp),
    ))
}

/// Point `(1/2, y)`, `y < 1/2`, on the level `ψ_α = r`, by bisection along the vertical midline.
fn bottom_of_level(alpha: f64, r: f64) -> [f64; 2] {
    let (mut lo, mut hi) = (0.0, 0.5);
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if psi_alpha_value(alpha, 0.5, m) > r {
            hi = m;
        } else {
            lo = m;
        }
    }
    [0.5, 0.5 * (lo + hi)]
}

fn period_check(c: &ExperimentConfig) -> Result<Report, CliError> {
    let alpha = c.model.alpha;
    let p = &c.period;
    let table = table_for(c)?;
    let mut checks = Vec::new();
    let mut agreement = Vec::new();
    for &r in &p.levels {
        let coarea = period_t(alpha, r, PeriodMethod::Coarea).map_err(runtime)?;
        let orbit = period_t(alpha, r, PeriodMethod::Orbit).map_err(runtime)?;
        let rel_diff = (coarea / orbit - 1.0).abs();
        checks.push(Check::at_most(
            format!("coarea vs orbit at r={r}"),
            rel_diff,
            p.agreement_tol,
        ));
        agreement.push(LevelAgreement {
            r,
            coarea,
            orbit,
            rel_diff,
        });
    }
    let stream = SuperStream::new(
        StreamSpec::new(alpha, StreamVariant::WholeSquare, 1.0).map_err(runtime)?,
        table.clone(),
        false,
    )
    .map_err(runtime)?;
    let mut return_times = Vec::new();
    for &r in &p.return_levels {
        let start = bottom_of_level(alpha, r);
        let time = orbit_return_time(|x| stream.velocity(x).unwrap_or([0.0, 0.0]), start, 10.0)
            .map_err(runtime)?;
        checks.push(Check::at_most(
            format!("return time at r={r}"),
            (time - 1.0).abs(),
            p.return_tol,
        ));
        return_times.push(ReturnTime { r, time });
    }
    let limit_exact = period_at_max(alpha);
    let limit_coarea = period_t(alpha, p.limit_level, PeriodMethod::Coarea).map_err(runtime)?;
    checks.push(Check::at_most(
        format!("period at r={} vs limit {limit_exact}", p.limit_level),
        (limit_coarea / limit_exact - 1.0).abs(),
        p.limit_tol,
    ));
    let data = PeriodData {
        alpha,
        table_r: table.r.clone(),
        table_t: table.t.clone(),
        agreement,
        return_times,
        limit_level: p.limit_level,
        limit_coarea,
        limit_exact,
    };
    Ok(Report::new(
        ExperimentKind::PeriodCheck,
        checks,
        ReportData::Period(data),
    ))
}

fn regularity_probe(c: &ExperimentConfig) -> Result<Report, CliError> {
    let r = &c.regularity;
    let table = table_for(c)?;
    let reports = wsp_probe_multi(&table, r.gamma, &r.p, &r.resolutions, &QuadSpec::default())
        .map_err(runtime)?;
    let checks = reports
        .iter()
        .zip(&r.expect)
        .map(|(rep, want)| {
            Check::new(
                format!("verdict gamma={} p={}", rep.gamma, rep.p),
                rep.verdict.as_str() == want,
                format!(
                    "{} (expected {want}; strip rule {})",
                    rep.verdict.as_str(),
                    rep.tail_verdict.as_str()
                ),
            )
        })
        .collect();
    Ok(Report::new(
        ExperimentKind::RegularityProbe,
        checks,
        ReportData::Regularity(reports),
    ))
}

fn holder(c: &ExperimentConfig) -> Result<Report, CliError> {
    let protocol = protocol_for(c, table_for(c)?)?;
    let region = match c.holder.region {
        Region::Corner => HolderRegion::Corner,
        Region::Interior => HolderRegion::Interior,
    };
    let report =
        holder_probe(&protocol, region, &c.holder.scales, &flow_options(c)).map_err(runtime)?;
    let mut checks = vec![
        Check::new(
            "beta positive",
            report.beta > 0.0,
            format!("{}", report.beta),
        ),
        Check::at_least("beta lower bound", report.beta, c.holder.min_beta),
    ];
    if c.holder.require_stable {
        checks.push(Check::new(
            "local slopes within 20% of beta",
            report.stable,
            format!("{:?}", report.local_slopes),
        ));
    }
    Ok(Report::new(
        ExperimentKind::HolderProbe,
        checks,
        ReportData::Holder(report),
    ))
}

pub fn bad_set_spec(c: &ExperimentConfig) -> BadSetSpec {
    let x = &c.counterexample;
    let rates = match x.rate {
        RateKind::Pow2 => RateSequence::Pow2,
        RateKind::Exponential => RateSequence::Exponential { decay: x.decay },
        RateKind::Constant => RateSequence::Constant(x.value),
        RateKind::List => RateSequence::List(x.rates.clone()),
    };
    let times = if x.times.is_empty() {
        Subsequence::Offset(x.offset)
    } else {
        Subsequence::List(x.times.clone())
    };
    let mut spec = BadSetSpec::new(rates, times, x.terms, c.model.dim, c.grid.n);
    spec.samples_per_axis = x.samples_per_axis;
    spec.center = x.center.clone();
    spec
}

fn no_rate(c: &ExperimentConfig) -> Result<Report, CliError> {
    let report = demonstrate_no_rate(&bad_set_spec(c), &map_for(c), c.counterexample.j_max)
        .map_err(runtime)?;
    let mut checks: Vec<Check> = report
        .rows
        .iter()
        .map(|r| {
            Check::at_least(
                format!("ball average j={}", r.j),
                r.ball_average,
                mixlab::counterexample::BALL_AVERAGE_MIN,
            )
        })
        .collect();
    checks.extend(report.rows.iter().map(|r| {
        Check::new(
            format!("geometric scale exceeds lambda j={}", r.j),
            r.geometric_scale > r.lambda,
            format!("{} > {}", r.geometric_scale, r.lambda),
        )
    }));
    checks.extend(report.rows.iter().map(|r| {
        Check::at_least(
            format!("mix-norm floor j={}", r.j),
            r.mix_norm,
            r.mix_norm_floor,
        )
    }));
    if let Some(last) = report.rows.last() {
        checks.push(Check::new(
            format!("mix-norm decreases by step {}", report.late_step),
            report.late_mix_norm < last.mix_norm,
            format!("{} < {}", report.late_mix_norm, last.mix_norm),
        ));
    }
    checks.push(Check::new("demonstration", report.pass, ""));
    Ok(Report::new(
        ExperimentKind::NoRateDemo,
        checks,
        ReportData::NoRate(report),
    ))
}

/// One table per plottable series of `report`.
pub fn emit_plot_data(report: &Report) -> Vec<PlotTable> {
    match &report.data {
        ReportData::Lemmas(d) => {
            let mut t = PlotTable::new(
                "lemmas.csv",
                "exact lemma checks",
                &[
                    ("check", "rectangle or equidistribution"),
                    ("k", "cube level (empty for the rectangle suite)"),
                    ("steps", "map iterations"),
                    ("cases", "cases checked"),
                    ("failures", "failed cases"),
                ],
            );
            t.push(vec![
                format!("rectangle {}", d.rectangle.variant),
                String::new(),
                String::new(),
                d.rectangle.cases_total.to_string(),
                d.rectangle.failures.len().to_string(),
            ]);
            for e in &d.equidistribution {
                let steps: Vec<String> = e.steps.iter().map(|s| s.to_string()).collect();
                t.push(vec![
                    "equidistribution".into(),
                    e.k.to_string(),
                    steps.join(" "),
                    e.report.cases_total.to_string(),
                    e.report.failures.len().to_string(),
                ]);
            }
            vec![t]
        }
        ReportData::Mixing(d) => vec![mixing_table(&d.report)],
        ReportData::Flow(f) => {
            let mut t = PlotTable::new(
                "flow_vs_map.csv",
                "time-t flow map against the discrete map",
                &[
                    ("t", "flow time"),
                    ("samples", "sample points"),
                    ("max_error", "largest distance between flow and map images"),
                    ("mean_error", "mean distance"),
                    ("max_integrator_error", "largest integrator error estimate"),
                ],
            );
            t.push(vec![
                num(f.t),
                f.samples.to_string(),
                num(f.max_error),
                num(f.mean_error),
                num(f.max_integrator_error),
            ]);
            vec![t]
        }
        ReportData::Period(d) => period_tables(d),
        ReportData::Regularity(reps) => {
            let mut t = PlotTable::new(
                "probe_ratios.csv",
                "fractional Hessian norm estimates by resolution",
                &[
                    ("p", "Lebesgue exponent"),
                    ("n", "resolution level"),
                    ("margin", "excluded boundary strip"),
                    ("estimate", "norm estimate"),
                    (
                        "ratio",
                        "estimate over the previous level's (empty at the first)",
                    ),
                ],
            );
            for r in reps {
                for (i, &n) in r.resolutions.iter().enumerate() {
                    let ratio = if i == 0 {
                        None
                    } else {
                        r.ratios.get(i - 1).copied()
                    };
                    t.push(vec![
                        num(r.p),
                        n.to_string(),
                        num(r.margins[i]),
                        num(r.estimates[i]),
                        opt(ratio),
                    ]);
                }
            }
            let mut s = PlotTable::new(
                "probe_summary.csv",
                "verdict per exponent",
                &[
                    ("alpha", "stream exponent"),
                    ("gamma", "fractional order"),
                    ("p", "Lebesgue exponent"),
                    ("verdict", "ratio rule"),
                    ("tail_verdict", "strip rule"),
                    ("strip_growth", "ratio of the last two strip masses"),
                    ("threshold", "predicted critical p"),
                ],
            );
            for r in reps {
                s.push(vec![
                    num(r.alpha),
                    num(r.gamma),
                    num(r.p),
                    r.verdict.as_str().into(),
                    r.tail_verdict.as_str().into(),
                    num(r.strip_growth),
                    num(r.threshold),
                ]);
            }
            vec![t, s]
        }
        ReportData::Holder(h) => {
            let mut t = PlotTable::new(
                "holder.csv",
                "separation of trajectory pairs",
                &[
                    ("j", "pair scale, distance 2^-j"),
                    ("distance", "initial distance"),
                    ("max_displacement", "largest separation over one period"),
                    ("ratio", "max_displacement / distance"),
                ],
            );
            for i in 0..h.scales.len() {
                t.push(vec![
                    h.scales[i].to_string(),
                    num(h.distances[i]),
                    num(h.max_displacement[i]),
                    num(h.ratios[i]),
                ]);
            }
            vec![t]
        }
        ReportData::NoRate(r) => {
            let mut t = PlotTable::new(
                "no_rate.csv",
                "pushed-forward bad set at the designated times",
                &[
                    ("j", "term index"),
                    ("n_j", "map iterations"),
                    ("lambda", "rate value at n_j"),
                    ("radius", "designated ball radius"),
                    ("ball_average", "average over the designated ball"),
                    ("geometric_scale", "geometric mixing scale at kappa 1/2"),
                    ("mix_norm", "mix-norm"),
                    ("mix_norm_floor", "lower bound from the unmixed ball"),
                ],
            );
            for row in &r.rows {
                t.push(vec![
                    row.j.to_string(),
                    row.n_j.to_string(),
                    num(row.lambda),
                    num(row.radius),
                    num(row.ball_average),
                    num(row.geometric_scale),
                    num(row.mix_norm),
                    num(row.mix_norm_floor),
                ]);
            }
            vec![t]
        }
    }
}

/// `t`, one geometric-scale column per κ, `mix_norm`, `h_m12` (torus only).
pub fn mixing_table(report: &MixingReport) -> PlotTable {
    let names: Vec<String> = report.kappas.iter().map(|&k| kappa_column(k)).collect();
    let descs: Vec<String> = report
        .kappas
        .iter()
        .map(|k| format!("geometric mixing scale at kappa {k}"))
        .collect();
    let mut cols: Vec<(&str, &str)> = vec![("t", "map steps")];
    cols.extend(
        names
            .iter()
            .map(String::as_str)
            .zip(descs.iter().map(String::as_str)),
    );
    cols.push(("mix_norm", "multiscale mix-norm"));
    cols.push((
        "h_m12",
        "homogeneous Sobolev norm of order -1/2 (torus only, else empty)",
    ));
    let mut t = PlotTable::new("mixing.csv", "mixing measures by step", &cols);
    for r in &report.records {
        let mut row = vec![r.step.to_string()];
        row.extend(r.geometric_scale.iter().map(|&g| num(g)));
        row.push(num(r.mix_norm));
        row.push(opt(r.h_minus_half));
        t.push(row);
    }
    t
}

fn period_tables(d: &PeriodData) -> Vec<PlotTable> {
    let mut table = PlotTable::new(
        "period_table.csv",
        "level-set period table",
        &[("r", "level"), ("T", "period of the level set")],
    );
    for (r, t) in d.table_r.iter().zip(&d.table_t) {
        table.push(vec![num(*r), num(*t)]);
    }
    let mut levels = PlotTable::new(
        "period_levels.csv",
        "period by two estimators",
        &[
            ("r", "level"),
            ("coarea", "area-derivative estimate"),
            ("orbit", "orbit-integration estimate"),
            ("rel_diff", "|coarea / orbit - 1|"),
        ],
    );
    for a in &d.agreement {
        levels.push(vec![num(a.r), num(a.coarea), num(a.orbit), num(a.rel_diff)]);
    }
    let mut returns = PlotTable::new(
        "return_times.csv",
        "orbit return times of the rescaled stream",
        &[("r", "level"), ("time", "return time")],
    );
    for rt in &d.return_times {
        returns.push(vec![num(rt.r), num(rt.time)]);
    }
    vec![table, levels, returns]
}
