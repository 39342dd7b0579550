//! Resolution sweeps of `‖Λ^γ D²ψ^α‖_{L^p}` with shrinking boundary margins.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lambda_gamma, super_hessian, QuadSpec, Rect, RegularityError};
use crate::stream::PeriodTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converging,
    Diverging,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converging => "converging",
            Self::Diverging => "diverging",
            Self::Inconclusive => "inconclusive",
        }
    }
}

pub const CONVERGING_BAND: (f64, f64) = (0.9, 1.1);
pub const DIVERGING_RATIO: f64 = 1.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityProbeReport {
    pub alpha: f64,
    pub gamma: f64,
    pub p: f64,
    pub resolutions: Vec<u32>,
    /// Excluded boundary strip `4 / 2^n` per resolution.
    pub margins: Vec<f64>,
    pub estimates: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Ratio of the last two increments of `estimate^p`, the mass added by each new
    /// boundary strip. Tends to `2^{(β+γ)p - 1}` once the boundary singularity dominates.
    pub strip_growth: f64,
    /// Ratio rule: last two ratios in `[0.9, 1.1]` with shrinking strips, or every ratio `≥ 1.2`.
    pub verdict: Verdict,
    /// Strip rule alone: converging when `strip_growth < 1`, diverging when `> 1`.
    pub tail_verdict: Verdict,
    /// `1 / (max{α/2, (2-2α)/(2-α)} + γ)`.
    pub threshold: f64,
}

pub fn singular_exponent(alpha: f64) -> f64 {
    (alpha / 2.0).max((2.0 - 2.0 * alpha) / (2.0 - alpha))
}

pub fn predicted_threshold(alpha: f64, gamma: f64) -> f64 {
    1.0 / (singular_exponent(alpha) + gamma)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub ratios: Vec<f64>,
    pub strip_growth: f64,
    pub verdict: Verdict,
    pub tail_verdict: Verdict,
}

/// Verdicts for a sequence of `L^p` estimates at increasing resolution.
pub fn classify(estimates: &[f64], p: f64) -> Classification {
    let ratios: Vec<f64> = estimates.windows(2).map(|w| w[1] / w[0]).collect();
    let mass: Vec<f64> = estimates.iter().map(|e| e.powf(p)).collect();
    let m = mass.len();
    let strip_growth = if m >= 3 {
        (mass[m - 1] - mass[m - 2]) / (mass[m - 2] - mass[m - 3])
    } else {
        f64::NAN
    };
    let shrinking = strip_growth.abs() < 1.0;
    let band = |r: &f64| (CONVERGING_BAND.0..=CONVERGING_BAND.1).contains(r);
    let verdict = if ratios.len() >= 2 && ratios[ratios.len() - 2..].iter().all(band) && shrinking {
        Verdict::Converging
    } else if !ratios.is_empty() && ratios.iter().all(|&r| r >= DIVERGING_RATIO) {
        Verdict::Diverging
    } else {
        Verdict::Inconclusive
    };
    let tail_verdict = if shrinking {
        Verdict::Converging
    } else if strip_growth > 1.0 {
        Verdict::Diverging
    } else {
        Verdict::Inconclusive
    };
    Classification {
        ratios,
        strip_growth,
        verdict,
        tail_verdict,
    }
}

/// Cell centres `(i + ½)h` with `i ≤ j < side/2` at least `margin` from the boundary, with
/// the multiplicity of their orbit under the symmetries of the square.
fn fundamental_cells(n: u32, margin: f64) -> Vec<([f64; 2], f64)> {
    let side = 1usize << n;
    let h = 1.0 / side as f64;
    let mut out = Vec::new();
    for i in 0..side / 2 {
        let x = (i as f64 + 0.5) * h;
        if x < margin {
            continue;
        }
        for j in i..side / 2 {
            let y = (j as f64 + 0.5) * h;
            out.push(([x, y], if i == j { 4.0 } else { 8.0 }));
        }
    }
    out
}

/// With `spec.check`, every `CHECK_STRIDE`-th cell is verified against the refined rule.
pub const CHECK_STRIDE: usize = 32;

/// `|Λ^γ D²ψ^α|` (Frobenius) at each fundamental cell, or `|D²ψ^α|` when `γ = 0`.
fn field_sizes(
    table: &Arc<PeriodTable>,
    gamma: f64,
    cells: &[([f64; 2], f64)],
    spec: &QuadSpec,
) -> Result<Vec<f64>, RegularityError> {
    let hess = super_hessian(table.clone())?;
    let frob = |v: [f64; 3]| (v[0] * v[0] + 2.0 * v[1] * v[1] + v[2] * v[2]).sqrt();
    let fast = spec.unchecked();
    cells
        .par_iter()
        .enumerate()
        .map(|(i, &(x, _))| {
            if gamma == 0.0 {
                Ok(frob(hess(x)))
            } else {
                let s = if i % CHECK_STRIDE == 0 { spec } else { &fast };
                lambda_gamma(&hess, gamma, x, &Rect::UNIT, s).map(frob)
            }
        })
        .collect()
}

/// One report per `p`, all sharing the same evaluations of the field.
pub fn wsp_probe_multi(
    table: &Arc<PeriodTable>,
    gamma: f64,
    ps: &[f64],
    resolutions: &[u32],
    spec: &QuadSpec,
) -> Result<Vec<RegularityProbeReport>, RegularityError> {
    if resolutions.len() < 3 || resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(RegularityError::Resolutions(format!(
            "need at least 3 strictly increasing levels, got {resolutions:?}"
        )));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(RegularityError::GammaOutOfRange(gamma));
    }
    if let Some(p) = ps.iter().find(|&&p| !(p >= 1.0)) {
        return Err(RegularityError::Parameter(format!("p = {p} < 1")));
    }
    let margins: Vec<f64> = resolutions
        .iter()
        .map(|&n| 4.0 / (1u64 << n) as f64)
        .collect();
    let mut sums = vec![vec![0.0; resolutions.len()]; ps.len()];
    for (r, (&n, &margin)) in resolutions.iter().zip(&margins).enumerate() {
        let cells = fundamental_cells(n, margin);
        let sizes = field_sizes(table, gamma, &cells, spec)?;
        let area = 1.0 / (1u64 << (2 * n)) as f64;
        for (k, &p) in ps.iter().enumerate() {
            sums[k][r] = cells
                .iter()
                .zip(&sizes)
                .map(|((_, w), s)| w * area * s.powf(p))
                .sum::<f64>()
                .powf(1.0 / p);
        }
    }
    let alpha = table.alpha;
    Ok(ps
        .iter()
        .zip(sums)
        .map(|(&p, estimates)| {
            let c = classify(&estimates, p);
            RegularityProbeReport {
                alpha,
                gamma,
                p,
                resolutions: resolutions.to_vec(),
                margins: margins.clone(),
                estimates,
                ratios: c.ratios,
                strip_growth: c.strip_growth,
                verdict: c.verdict,
                tail_verdict: c.tail_verdict,
                threshold: predicted_threshold(alpha, gamma),
            }
        })
        .collect())
}

pub fn wsp_probe(
    table: &Arc<PeriodTable>,
    gamma: f64,
    p: f64,
    resolutions: &[u32],
    spec: &QuadSpec,
) -> Result<RegularityProbeReport, RegularityError> {
    Ok(wsp_probe_multi(table, gamma, &[p], resolutions, spec)?.remove(0))
}

/// Summary table `alpha,gamma,p,verdict,threshold,tail_verdict,strip_growth`.
pub fn write_summary_csv<W: Write>(
    mut w: W,
    reports: &[RegularityProbeReport],
) -> std::io::Result<()> {
    writeln!(
        w,
        "alpha,gamma,p,verdict,threshold,tail_verdict,strip_growth"
    )?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.alpha,
            r.gamma,
            r.p,
            r.verdict.as_str(),
            r.threshold,
            r.tail_verdict.as_str(),
            r.strip_growth
        )?;
    }
    Ok(())
}
