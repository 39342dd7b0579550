//! Pointwise checks on `ψ_α`: concavity of `log ψ_α` and the boundary envelopes of `D^k ψ_α`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RegularityError;
use crate::stream::{psi_alpha, sin_pi};
use crate::Real;

pub const HESSIAN_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogConcavityReport {
    pub alpha: f64,
    pub n: u32,
    pub points: usize,
    /// Largest trace of `D² log ψ_α`.
    pub max_trace: f64,
    /// Smallest determinant of `D² log ψ_α`.
    pub min_det: f64,
    /// Largest `∂_xx f_α + b²/((a+b)²a²)`, which the chain bound says is `≤ 0`.
    pub max_chain_excess: f64,
    pub worst_point: [f64; 2],
    pub pass: bool,
}

/// Hessian of `f_α(s, t) = log(sin s sin t (sin s + sin t)^{-α})` at `(s, t) = π(x, y)`,
/// with `∂_xx f_α`'s chain-bound excess.
fn log_hessian<F: Real>(alpha: F, x: F, y: F) -> ([[F; 2]; 2], F) {
    let pi = F::PI();
    let (a, b) = (sin_pi(x), sin_pi(y));
    let (ca, cb) = ((pi * x).cos(), (pi * y).cos());
    let s2 = (a + b) * (a + b);
    let one = F::one();
    let fxx = -one / (a * a) + alpha * (one + a * b) / s2;
    let fyy = -one / (b * b) + alpha * (one + a * b) / s2;
    let fxy = alpha * ca * cb / s2;
    let excess = fxx + b * b / (s2 * a * a);
    ([[fxx, fxy], [fxy, fyy]], excess)
}

/// `D² log ψ_α` on the cell centres of the `2^n` grid: trace `≤ 0`, determinant `≥ 0`.
pub fn log_concavity_check<F: Real>(
    alpha: F,
    n: u32,
) -> Result<LogConcavityReport, RegularityError> {
    let a64 = alpha.to_f64().unwrap_or(f64::NAN);
    if !(0.0..=1.0).contains(&a64) {
        return Err(RegularityError::Parameter(format!(
            "alpha {a64} outside [0, 1]"
        )));
    }
    let side = 1usize << n;
    let h = F::one() / F::from(side).unwrap();
    let half = F::lit(0.5);
    let pi2 = F::PI() * F::PI();
    let rows: Vec<(F, F, F, [F; 2])> = (0..side)
        .into_par_iter()
        .map(|i| {
            let x = (F::from(i).unwrap() + half) * h;
            let mut worst = (F::neg_infinity(), F::infinity(), F::neg_infinity(), [x, x]);
            for j in 0..side {
                let y = (F::from(j).unwrap() + half) * h;
                let (hs, excess) = log_hessian(alpha, x, y);
                let tr = pi2 * (hs[0][0] + hs[1][1]);
                let det = pi2 * pi2 * (hs[0][0] * hs[1][1] - hs[0][1] * hs[1][0]);
                if tr > worst.0 {
                    worst.0 = tr;
                    worst.3 = [x, y];
                }
                worst.1 = worst.1.min(det);
                worst.2 = worst.2.max(pi2 * excess);
            }
            worst
        })
        .collect();
    let mut out = (
        F::neg_infinity(),
        F::infinity(),
        F::neg_infinity(),
        [F::zero(); 2],
    );
    for r in rows {
        if r.0 > out.0 {
            out.0 = r.0;
            out.3 = r.3;
        }
        out.1 = out.1.min(r.1);
        out.2 = out.2.max(r.2);
    }
    let f = |v: F| v.to_f64().unwrap_or(f64::NAN);
    let (max_trace, min_det, max_chain_excess) = (f(out.0), f(out.1), f(out.2));
    Ok(LogConcavityReport {
        alpha: a64,
        n,
        points: side * side,
        max_trace,
        min_det,
        max_chain_excess,
        worst_point: [f(out.3[0]), f(out.3[1])],
        pass: max_trace <= HESSIAN_TOL
            && min_det >= -HESSIAN_TOL
            && max_chain_excess <= HESSIAN_TOL,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub alpha: f64,
    pub k: u8,
    pub n: u32,
    /// Added to the envelope exponent `2 - α - k` (0 for the real check).
    pub exponent_shift: f64,
    /// `sup |D^k ψ_α| (sin πx + sin πy)^{-(2-α-k+shift)}` on grids `n` and `n + 1`.
    pub sup: [f64; 2],
    pub constant: f64,
    pub stable: bool,
}

pub const ENVELOPE_STABILITY: f64 = 0.1;

/// Sup of `|D^k ψ_α| / (sin πx + sin πy)^{2-α-k+shift}` over cell centres at levels `n`, `n+1`.
pub fn envelope_check<F: Real>(
    alpha: F,
    k: u8,
    n: u32,
    exponent_shift: F,
) -> Result<EnvelopeReport, RegularityError> {
    let a64 = alpha.to_f64().unwrap_or(f64::NAN);
    if !(a64 > 0.0 && a64 < 1.0) {
        return Err(RegularityError::Parameter(format!(
            "alpha {a64} outside (0, 1)"
        )));
    }
    if k > 2 {
        return Err(RegularityError::Parameter(format!(
            "derivative order {k} > 2"
        )));
    }
    let exponent = F::lit(2.0) - alpha - F::from(k).unwrap() + exponent_shift;
    let sup_at = |level: u32| -> F {
        let side = 1usize << level;
        let h = F::one() / F::from(side).unwrap();
        let half = F::lit(0.5);
        (0..side)
            .into_par_iter()
            .map(|i| {
                let x = (F::from(i).unwrap() + half) * h;
                (0..side)
                    .map(|j| {
                        let y = (F::from(j).unwrap() + half) * h;
                        let jet = psi_alpha(alpha, x, y);
                        let size = match k {
                            0 => jet.value.abs(),
                            1 => jet.grad[0].hypot(jet.grad[1]),
                            _ => jet
                                .hess
                                .iter()
                                .flatten()
                                .fold(F::zero(), |s, v| s + *v * *v)
                                .sqrt(),
                        };
                        size * (sin_pi(x) + sin_pi(y)).powf(-exponent)
                    })
                    .fold(F::zero(), F::max)
            })
            .reduce(F::zero, F::max)
    };
    let f = |v: F| v.to_f64().unwrap_or(f64::NAN);
    let sup = [f(sup_at(n)), f(sup_at(n + 1))];
    let stable =
        sup.iter().all(|s| s.is_finite()) && (sup[1] / sup[0] - 1.0).abs() <= ENVELOPE_STABILITY;
    Ok(EnvelopeReport {
        alpha: a64,
        k,
        n,
        exponent_shift: f(exponent_shift),
        sup,
        constant: sup[0].max(sup[1]),
        stable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_zero_hessian_is_diagonal() {
        let (h, _) = log_hessian(0.0f64, 0.3, 0.7);
        assert_eq!(h[0][1], 0.0);
        let s = (std::f64::consts::PI * 0.3).sin();
        assert!((h[0][0] + 1.0 / (s * s)).abs() < 1e-12);
    }

    #[test]
    fn log_hessian_matches_finite_differences() {
        let alpha = 0.6f64;
        let g = |x: f64, y: f64| {
            let (a, b) = (x.sin(), y.sin());
            (a * b).ln() - alpha * (a + b).ln()
        };
        let (s, t, e) = (1.1f64, 0.7f64, 1e-4);
        let fxx = (g(s + e, t) - 2.0 * g(s, t) + g(s - e, t)) / (e * e);
        let fxy =
            (g(s + e, t + e) - g(s + e, t - e) - g(s - e, t + e) + g(s - e, t - e)) / (4.0 * e * e);
        let pi = std::f64::consts::PI;
        let (h, _) = log_hessian(alpha, s / pi, t / pi);
        assert!((h[0][0] - fxx).abs() < 1e-6);
        assert!((h[0][1] - fxy).abs() < 1e-6);
    }
}
