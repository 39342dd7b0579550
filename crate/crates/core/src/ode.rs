//! Dormand–Prince 5(4) with PI step-size control and cubic Hermite dense output.

use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated from the right-hand side when `None`.
    pub h0: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            h0: None,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("exceeded {0} steps")]
    TooManySteps(usize),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
}

/// One accepted step, with the endpoint derivatives needed for dense output.
pub struct Step<'a, F, const N: usize> {
    pub t0: F,
    pub y0: &'a [F; N],
    pub f0: &'a [F; N],
    pub t1: F,
    pub y1: &'a [F; N],
    pub f1: &'a [F; N],
    /// Local error estimate in units of the tolerance (at most 1 for accepted steps).
    pub err: F,
}

impl<F: Real, const N: usize> Step<'_, F, N> {
    /// Cubic Hermite interpolant on `[t0, t1]`.
    pub fn interpolate(&self, t: F) -> [F; N] {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let one = F::one();
        let two = F::lit(2.0);
        let three = F::lit(3.0);
        let h00 = (one + two * s) * (one - s) * (one - s);
        let h10 = s * (one - s) * (one - s);
        let h01 = s * s * (three - two * s);
        let h11 = s * s * (s - one);
        let mut out = [F::zero(); N];
        for i in 0..N {
            out[i] =
                h00 * self.y0[i] + h10 * h * self.f0[i] + h01 * self.y1[i] + h11 * h * self.f1[i];
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t_end`, calling `observer` after every accepted
/// step. Returns the final time (earlier than `t_end` if the observer stopped), state and stats.
pub fn integrate<F, const N: usize>(
    f: impl FnMut(F, &[F; N]) -> [F; N],
    t0: F,
    y0: [F; N],
    t_end: F,
    opts: &OdeOptions,
    observer: impl FnMut(&Step<'_, F, N>) -> Control,
) -> Result<(F, [F; N], OdeStats), OdeError>
where
    F: Real,
{
    integrate_limited(f, t0, y0, t_end, opts, |_| F::infinity(), observer)
}

/// [`integrate`] with the step size additionally capped by `h_limit(y)` at the start of
/// every step.
pub fn integrate_limited<F, const N: usize>(
    mut f: impl FnMut(F, &[F; N]) -> [F; N],
    t0: F,
    y0: [F; N],
    t_end: F,
    opts: &OdeOptions,
    h_limit: impl Fn(&[F; N]) -> F,
    mut observer: impl FnMut(&Step<'_, F, N>) -> Control,
) -> Result<(F, [F; N], OdeStats), OdeError>
where
    F: Real,
{
    let mut stats = OdeStats::default();
    let span = t_end - t0;
    if span == F::zero() {
        return Ok((t0, y0, stats));
    }
    let dir = span.signum();
    let rtol = F::lit(opts.rtol);
    let atol = F::lit(opts.atol);
    let h_max = F::lit(opts.h_max).min(span.abs());
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.evals += 1;
    let scale = |y: &[F; N], i: usize| atol + rtol * y[i].abs();
    let mut h = match opts.h0 {
        Some(h) => F::lit(h).abs().min(h_max),
        None => {
            let d0 = rms::<F, N>(|i| y[i] / scale(&y, i));
            let d1 = rms::<F, N>(|i| k1[i] / scale(&y, i));
            let g = if d0 < F::lit(1e-5) || d1 < F::lit(1e-5) {
                F::lit(1e-6)
            } else {
                F::lit(0.01) * d0 / d1
            };
            g.min(h_max)
        }
    };
    let mut err_prev = F::lit(1e-4);
    let tiny = F::epsilon() * F::lit(16.0);
    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(OdeError::TooManySteps(opts.max_steps));
        }
        h = h.min(h_limit(&y));
        let remaining = (t_end - t) * dir;
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if h <= tiny * t.abs().max(F::one()) {
            return Err(OdeError::StepUnderflow(t.to_f64().unwrap_or(f64::NAN)));
        }
        let hs = h * dir;
        let mut k = [[F::zero(); N]; 7];
        k[0] = k1;
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = F::lit(A[s][j]);
                if a != F::zero() {
                    for i in 0..N {
                        ys[i] += hs * a * kj[i];
                    }
                }
            }
            if s == 6 {
                // FSAL: the seventh stage is evaluated at the fifth-order solution.
                k[6] = f(t + hs, &ys);
                stats.evals += 1;
                let err = rms::<F, N>(|i| {
                    let e: F = (0..7)
                        .map(|j| F::lit(E[j]) * k[j][i])
                        .fold(F::zero(), |a, b| a + b)
                        * hs;
                    e / (atol + rtol * y[i].abs().max(ys[i].abs()))
                });
                if !err.is_finite() || ys.iter().any(|v| !v.is_finite()) {
                    if h <= tiny {
                        return Err(OdeError::NonFinite(t.to_f64().unwrap_or(f64::NAN)));
                    }
                    h = h * F::lit(0.25);
                    stats.rejected += 1;
                    break;
                }
                if err <= F::one() {
                    let t_new = if last { t_end } else { t + hs };
                    let step = Step {
                        t0: t,
                        y0: &y,
                        f0: &k1,
                        t1: t_new,
                        y1: &ys,
                        f1: &k[6],
                        err,
                    };
                    let control = observer(&step);
                    stats.accepted += 1;
                    t = t_new;
                    y = ys;
                    k1 = k[6];
                    if last || control == Control::Stop {
                        return Ok((t, y, stats));
                    }
                    let e = err.max(F::lit(1e-10));
                    let fac = F::lit(0.9) * e.powf(F::lit(-0.17)) * err_prev.powf(F::lit(0.04));
                    h = (h * fac.max(F::lit(0.2)).min(F::lit(10.0))).min(h_max);
                    err_prev = e;
                } else {
                    stats.rejected += 1;
                    let fac = F::lit(0.9) * err.powf(F::lit(-0.2));
                    h = h * fac.max(F::lit(0.2));
                }
                break;
            }
            k[s] = f(t + F::lit(C[s]) * hs, &ys);
            stats.evals += 1;
        }
    }
}

fn rms<F: Real, const N: usize>(g: impl Fn(usize) -> F) -> F {
    let s = (0..N).map(|i| g(i) * g(i)).fold(F::zero(), |a, b| a + b);
    (s / F::lit(N as f64)).sqrt()
}
