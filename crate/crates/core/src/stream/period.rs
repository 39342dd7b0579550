//! Traversal time `T(r)` of the level curve `{ψ_α = r}` under `∇^⊥ψ_α`, and the table that
//! turns `ψ_α` into the constant-period stream function `ψ^α = ∫_0^{ψ_α} T`.
//!
//! Two estimators: the coarea route differentiates the super-level area
//! `A(r) = |{ψ_α > r}|` (so `T = -A'`), the orbit route times one revolution with
//! Dormand–Prince.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::psi::{psi_alpha, psi_alpha_value};
use super::StreamError;
use crate::ode::{integrate, Control, OdeOptions};
use crate::quad;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodMethod {
    Coarea,
    Orbit,
}

fn check(alpha: f64, r: f64) -> Result<(), StreamError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StreamError::AlphaOutOfRange(alpha));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(StreamError::LevelOutOfRange(r));
    }
    Ok(())
}

/// Largest `y ∈ (0, 1/2]` below the level: the root of `ψ_α(x, ·) = r` on the lower half,
/// where `ψ_α(x, ·)` is increasing. `None` if `ψ_α(x, 1/2) ≤ r`.
fn lower_root(alpha: f64, x: f64, r: f64) -> Option<f64> {
    let f = |y: f64| psi_alpha_value(alpha, x, y) - r;
    if f(0.5) <= 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    let mut y = 0.25;
    for _ in 0..200 {
        let j = psi_alpha(alpha, x, y);
        let v = j.value - r;
        if v > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        if hi - lo < 1e-17 {
            break;
        }
        if v == 0.0 {
            break;
        }
        let step = v / j.grad[1];
        let next = y - step;
        if step.is_finite() && next > lo && next < hi {
            y = next;
            if step.abs() <= 1e-16 * y {
                break;
            }
        } else {
            y = 0.5 * (lo + hi);
        }
    }
    Some(y)
}

/// Root of `ψ_α(x, 1/2) = r` on `(0, 1/2)`: where the level curve meets the midline.
fn midline_root(alpha: f64, r: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if psi_alpha_value(alpha, m, 0.5) > r {
            hi = m;
        } else {
            lo = m;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `|{ψ_α > r}|` from the chord lengths of the convex super-level set.
///
/// With `x = x_0 + (1/2 - x_0) u²` the square-root behaviour at the tip is removed; geometric
/// panels in `u` resolve the boundary layer of small levels.
pub fn superlevel_area(alpha: f64, r: f64) -> Result<f64, StreamError> {
    check(alpha, r)?;
    let x0 = midline_root(alpha, r);
    let span = 0.5 - x0;
    let integrand = |u: f64| {
        let x = x0 + span * u * u;
        match lower_root(alpha, x, r) {
            Some(y) => (0.5 - y) * 2.0 * span * u,
            None => 0.0,
        }
    };
    let mut total = 0.0;
    let mut hi = 1.0;
    for _ in 0..40 {
        let lo = 0.5 * hi;
        total += quad::integrate(quad::gl20(), lo, hi, integrand);
        hi = lo;
    }
    total += quad::integrate(quad::gl20(), 0.0, hi, integrand);
    Ok(4.0 * total)
}

/// `T(r) = -A'(r)` by Richardson-extrapolated central differences.
pub fn period_coarea(alpha: f64, r: f64) -> Result<f64, StreamError> {
    check(alpha, r)?;
    let h = 0.01 * r.min(1.0 - r);
    let d = |h: f64| -> Result<f64, StreamError> {
        Ok((superlevel_area(alpha, r - h)? - superlevel_area(alpha, r + h)?) / (2.0 * h))
    };
    let (d1, d2) = (d(h)?, d(0.5 * h)?);
    Ok((4.0 * d2 - d1) / 3.0)
}

/// Return time to the ray `{x = 1/2, y < 1/2}` for a planar field, starting on that ray.
pub fn orbit_return_time(
    field: impl Fn([f64; 2]) -> [f64; 2],
    start: [f64; 2],
    t_max: f64,
) -> Result<f64, StreamError> {
    let opts = OdeOptions {
        rtol: 1e-11,
        atol: 1e-13,
        ..Default::default()
    };
    let x0 = start[0];
    let mut hit = None;
    let mut left = false;
    integrate(
        |_, y: &[f64; 2]| field(*y),
        0.0,
        start,
        t_max,
        &opts,
        |s| {
            if !left {
                left = (s.y1[0] - x0).abs() > 1e-9;
                return Control::Continue;
            }
            let crosses = (s.y0[0] - x0) * (s.y1[0] - x0) <= 0.0 && s.y1[1] < 0.5 && s.y0[1] < 0.5;
            if crosses && (s.y0[0] - x0).abs() > 0.0 {
                let before = (s.y0[0] - x0).signum();
                let (mut a, mut b) = (s.t0, s.t1);
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    if (s.interpolate(m)[0] - x0).signum() == before {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                hit = Some(0.5 * (a + b));
                return Control::Stop;
            }
            Control::Continue
        },
    )?;
    hit.ok_or(StreamError::LevelNotFound(start[1]))
}

/// `T(r)` by timing one revolution of `∇^⊥ψ_α` from the bottom of the level curve.
pub fn period_orbit(alpha: f64, r: f64) -> Result<f64, StreamError> {
    check(alpha, r)?;
    let y0 = lower_root(alpha, 0.5, r).ok_or(StreamError::LevelNotFound(r))?;
    let field = |p: [f64; 2]| {
        let j = psi_alpha(alpha, p[0], p[1]);
        [-j.grad[1], j.grad[0]]
    };
    orbit_return_time(field, [0.5, y0], 100.0)
}

pub fn period_t(alpha: f64, r: f64, method: PeriodMethod) -> Result<f64, StreamError> {
    match method {
        PeriodMethod::Coarea => period_coarea(alpha, r),
        PeriodMethod::Orbit => period_orbit(alpha, r),
    }
}

/// `lim_{r→1} T(r) = 4 / ((2 - α) π)`: the Hessian at the centre is `-(1 - α/2) π² I`.
pub fn period_at_max(alpha: f64) -> f64 {
    4.0 / ((2.0 - alpha) * std::f64::consts::PI)
}

/// `lim_{r→0} T(r) = ∮_{∂Q} dσ / |∇ψ_α| = 4 / (2^α π²) ∫_0^π sin^{α-1}θ dθ`.
pub fn period_at_boundary(alpha: f64) -> f64 {
    // θ = (π/2) v^{1/α} makes the integrand smooth in v.
    let half = quad::integrate(quad::gl20(), 0.0, 1.0, |v| {
        let theta = std::f64::consts::FRAC_PI_2 * v.powf(1.0 / alpha);
        let jac = std::f64::consts::FRAC_PI_2 / alpha * v.powf(1.0 / alpha - 1.0);
        theta.sin().powf(alpha - 1.0) * jac
    });
    4.0 / (2f64.powf(alpha) * std::f64::consts::PI.powi(2)) * 2.0 * half
}

pub const TABLE_VERSION: u32 = 1;
pub const TABLE_R_MIN: f64 = 1e-6;

fn logit(r: f64) -> f64 {
    (r / (1.0 - r)).ln()
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Fritsch–Carlson slopes for a monotone piecewise-cubic Hermite interpolant.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 < 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// Sampled `T(r)` with monotone cubic interpolation in `z = logit r`, the exact limits at
/// `r = 0` and `r = 1` as anchors, and the cumulative integral `ψ^α(r) = ∫_0^r T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodTable {
    pub alpha: f64,
    pub method: PeriodMethod,
    pub version: u32,
    pub r: Vec<f64>,
    pub t: Vec<f64>,
    pub t_at_zero: f64,
    pub t_at_one: f64,
    #[serde(skip)]
    z: Vec<f64>,
    #[serde(skip)]
    slopes: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl PeriodTable {
    pub fn build(alpha: f64, n_samples: usize) -> Result<Self, StreamError> {
        Self::build_with(alpha, n_samples, PeriodMethod::Coarea)
    }

    pub fn build_with(
        alpha: f64,
        n_samples: usize,
        method: PeriodMethod,
    ) -> Result<Self, StreamError> {
        if n_samples < 64 {
            return Err(StreamError::TableTooSmall(n_samples));
        }
        check(alpha, 0.5)?;
        let (z0, z1) = (logit(TABLE_R_MIN), logit(1.0 - TABLE_R_MIN));
        let mut r: Vec<f64> = (0..n_samples)
            .map(|i| logistic(z0 + (z1 - z0) * i as f64 / (n_samples - 1) as f64))
            .collect();
        r[0] = TABLE_R_MIN;
        r[n_samples - 1] = 1.0 - TABLE_R_MIN;
        let t = r
            .iter()
            .map(|&r| period_t(alpha, r, method))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_samples(alpha, method, r, t)
    }

    fn from_samples(
        alpha: f64,
        method: PeriodMethod,
        r: Vec<f64>,
        t: Vec<f64>,
    ) -> Result<Self, StreamError> {
        if let Some((&r, &t)) = r.iter().zip(&t).find(|p| !(p.1.is_finite() && *p.1 > 0.0)) {
            return Err(StreamError::BadSample { r, t });
        }
        let mut table = Self {
            alpha,
            method,
            version: TABLE_VERSION,
            r,
            t,
            t_at_zero: period_at_boundary(alpha),
            t_at_one: period_at_max(alpha),
            z: Vec::new(),
            slopes: Vec::new(),
            cumulative: Vec::new(),
        };
        table.prepare();
        Ok(table)
    }

    fn prepare(&mut self) {
        self.z = self.r.iter().map(|&r| logit(r)).collect();
        self.slopes = pchip_slopes(&self.z, &self.t);
        let mut cum = Vec::with_capacity(self.r.len());
        cum.push(self.head_integral(self.r[0]));
        for i in 0..self.r.len() - 1 {
            let piece = quad::integrate(quad::gl8(), self.r[i], self.r[i + 1], |r| self.period(r));
            cum.push(cum[i] + piece);
        }
        self.cumulative = cum;
    }

    fn small_exponent(&self) -> f64 {
        self.alpha / (2.0 - self.alpha)
    }

    /// `∫_0^r T` below the first sample, where `T` is interpolated linearly in `r^{α/(2-α)}`.
    fn head_integral(&self, r: f64) -> f64 {
        let a = self.small_exponent();
        let (r0, t0) = (self.r[0], self.t[0]);
        r * self.t_at_zero + (t0 - self.t_at_zero) * r * (r / r0).powf(a) / (1.0 + a)
    }

    fn segment(&self, z: f64) -> usize {
        match self.z.binary_search_by(|v| v.total_cmp(&z)) {
            Ok(i) => i.min(self.z.len() - 2),
            Err(i) => i.clamp(1, self.z.len() - 1) - 1,
        }
    }

    /// `(T(r), T'(r))`.
    pub fn period_and_slope(&self, r: f64) -> (f64, f64) {
        let n = self.r.len();
        if r <= self.r[0] {
            if r <= 0.0 {
                return (self.t_at_zero, 0.0);
            }
            let a = self.small_exponent();
            let c = (self.t[0] - self.t_at_zero) / self.r[0].powf(a);
            return (self.t_at_zero + c * r.powf(a), c * a * r.powf(a - 1.0));
        }
        if r >= self.r[n - 1] {
            // Quadratic approach to the centre value in (1 - r).
            let e0 = 1.0 - self.r[n - 1];
            let c = (self.t[n - 1] - self.t_at_one) / (e0 * e0);
            let e = (1.0 - r).max(0.0);
            return (self.t_at_one + c * e * e, -2.0 * c * e);
        }
        let z = logit(r);
        let i = self.segment(z);
        let h = self.z[i + 1] - self.z[i];
        let s = (z - self.z[i]) / h;
        let (y0, y1, d0, d1) = (self.t[i], self.t[i + 1], self.slopes[i], self.slopes[i + 1]);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dh00 = 6.0 * s * s - 6.0 * s;
        let dh10 = 3.0 * s * s - 4.0 * s + 1.0;
        let dh01 = -6.0 * s * s + 6.0 * s;
        let dh11 = 3.0 * s * s - 2.0 * s;
        let dz = (dh00 * y0 + dh10 * h * d0 + dh01 * y1 + dh11 * h * d1) / h;
        (value, dz / (r * (1.0 - r)))
    }

    pub fn period(&self, r: f64) -> f64 {
        self.period_and_slope(r).0
    }

    /// `ψ^α` as a function of the level: `∫_0^r T`.
    pub fn cumulative(&self, r: f64) -> f64 {
        if r <= self.r[0] {
            return self.head_integral(r.max(0.0));
        }
        let n = self.r.len();
        let (i, base) = if r >= self.r[n - 1] {
            (n - 1, self.cumulative[n - 1])
        } else {
            let i = self.segment(logit(r));
            (i, self.cumulative[i])
        };
        base + quad::integrate(quad::gl8(), self.r[i], r.min(1.0), |s| self.period(s))
    }

    /// `max ψ^α = ∫_0^1 T`.
    pub fn total(&self) -> f64 {
        self.cumulative(1.0)
    }

    pub fn to_json(&self) -> Result<String, StreamError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, StreamError> {
        let mut t: Self = serde_json::from_str(s)?;
        if t.version != TABLE_VERSION {
            return Err(StreamError::Cache(format!(
                "table version {} (expected {TABLE_VERSION})",
                t.version
            )));
        }
        if t.r.len() != t.t.len() || t.r.len() < 64 {
            return Err(StreamError::Cache("sample arrays malformed".into()));
        }
        t.prepare();
        Ok(t)
    }

    pub fn cache_path(dir: &Path, alpha: f64, n_samples: usize, method: PeriodMethod) -> PathBuf {
        let m = match method {
            PeriodMethod::Coarea => "coarea",
            PeriodMethod::Orbit => "orbit",
        };
        dir.join(format!(
            "period_a{alpha:.12}_n{n_samples}_{m}_v{TABLE_VERSION}.json"
        ))
    }

    /// Loads a cached table keyed by `(α, n_samples, method, version)`, building and writing it
    /// when absent or unreadable.
    pub fn load_or_build(dir: &Path, alpha: f64, n_samples: usize) -> Result<Self, StreamError> {
        let path = Self::cache_path(dir, alpha, n_samples, PeriodMethod::Coarea);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(t) = Self::from_json(&text) {
                if t.alpha == alpha && t.r.len() == n_samples {
                    return Ok(t);
                }
            }
        }
        let t = Self::build(alpha, n_samples)?;
        std::fs::create_dir_all(dir)?;
        std::fs::write(&path, t.to_json()?)?;
        Ok(t)
    }

    /// `sup |T^{(k)}(r)| / ((1-r)^{-k} (1 + r^{α/(2-α) - k}))` over `r ∈ [lo, hi]` on a
    /// logit-uniform probe grid, for `k = 0, 1`.
    pub fn envelope_constant(&self, k: u32, lo: f64, hi: f64) -> f64 {
        let a = self.small_exponent();
        let m = 400;
        (0..=m)
            .map(|i| logistic(logit(lo) + (logit(hi) - logit(lo)) * i as f64 / m as f64))
            .map(|r| {
                let (t, dt) = self.period_and_slope(r);
                let v = if k == 0 { t.abs() } else { dt.abs() };
                let env = (1.0 - r).powi(-(k as i32)) * (1.0 + r.powf(a - k as f64));
                v / env
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn area_limits() {
        let a = 0.5;
        assert!(superlevel_area(a, 1e-9).unwrap() > 0.999);
        assert!(superlevel_area(a, 1.0 - 1e-6).unwrap() < 1e-4);
        let big = superlevel_area(a, 0.3).unwrap();
        let small = superlevel_area(a, 0.6).unwrap();
        assert!(big > small);
    }

    #[test]
    fn near_maximum_area_is_an_ellipse() {
        // ψ ≈ 1 - c ρ²/2 with c = (1 - α/2) π², so A(r) ≈ 2π (1 - r) / c.
        let a = 0.4;
        let e = 1e-5;
        let c = (1.0 - a / 2.0) * std::f64::consts::PI.powi(2);
        let area = superlevel_area(a, 1.0 - e).unwrap();
        assert!((area / (2.0 * std::f64::consts::PI * e / c) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn boundary_limit_matches_direct_quadrature() {
        // Plain midpoint sum of ∮ dσ/|∇ψ_α| on a fine mesh, away from the integrable endpoints.
        let a = 0.7;
        let m = 2_000_000;
        let s: f64 = (0..m)
            .map(|i| {
                let x = (i as f64 + 0.5) / m as f64;
                1.0 / (2f64.powf(a)
                    * std::f64::consts::PI
                    * (std::f64::consts::PI * x).sin().powf(1.0 - a))
            })
            .sum::<f64>()
            / m as f64;
        assert!((4.0 * s / period_at_boundary(a) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn pchip_preserves_monotone_data() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y = vec![0.0, 0.0, 0.1, 0.5, 3.0, 3.1, 3.1, 4.0, 9.0, 9.5];
        let d = pchip_slopes(&x, &y);
        assert!(d.iter().all(|&v| v >= 0.0));
        assert_eq!(d[1], 0.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            period_coarea(1.2, 0.5),
            Err(StreamError::AlphaOutOfRange(_))
        ));
        assert!(matches!(
            period_coarea(0.5, 1.0),
            Err(StreamError::LevelOutOfRange(_))
        ));
        assert!(matches!(
            PeriodTable::build(0.5, 10),
            Err(StreamError::TableTooSmall(10))
        ));
    }
}
