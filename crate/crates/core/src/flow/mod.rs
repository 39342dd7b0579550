//! Particle trajectories, flow maps and scalar transport under velocity protocols.

mod advect;
mod holder;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use advect::{advect_scalar, AdvectMode, AdvectOptions, Advected, Sampling};
pub use holder::{holder_probe, HolderRegion, HolderReport, CHECKPOINTS_PER_SEGMENT};

use crate::dyadic::{DyadicError, DyadicRational, PiecewiseDyadicAffineMap};
use crate::field::{Domain, FieldError};
use crate::ode::{integrate_limited, Control, OdeError, OdeOptions};
use crate::stream::{StreamError, VelocityProtocol};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("step size underflow near the boundary at {x:?}, t = {t}")]
    BoundaryStall { x: Vec<f64>, t: f64 },
    #[error("expected dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Relative and absolute local error tolerance per step.
    pub tol: f64,
    /// A step may move a particle towards a patch edge by at most this fraction of its
    /// distance to that edge. Zero disables the clamp.
    pub clamp: f64,
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            clamp: 0.25,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryEnd<const N: usize> {
    pub x: [f64; N],
    /// Largest accepted local error estimate, in the units of `tol`.
    pub error: f64,
    pub steps: usize,
}

/// Segment active just after `t` (forward) or just before `t` (backward), and the time at
/// which it ends in that direction.
fn piece(protocol: &VelocityProtocol, t: f64, forward: bool) -> (usize, f64) {
    let p = protocol.period;
    let base = (t / p).floor() * p;
    let phase = t - base;
    let segs = &protocol.schedule;
    if forward {
        let k = segs
            .iter()
            .position(|s| phase < s.end)
            .unwrap_or(segs.len() - 1);
        (k, base + segs[k].end)
    } else if phase == 0.0 {
        (segs.len() - 1, base - p + segs[segs.len() - 1].start)
    } else {
        let k = segs
            .iter()
            .position(|s| phase <= s.end)
            .unwrap_or(segs.len() - 1);
        (k, base + segs[k].start)
    }
}

fn wrap<const N: usize>(domain: Domain, x: [f64; N]) -> [f64; N] {
    match domain {
        Domain::Torus => x.map(|v| v.rem_euclid(1.0)),
        Domain::Box => x,
    }
}

/// Integrates `dx/dt = u(x, t)` from `t0` to `t1` (either direction). Segment boundaries are
/// hit exactly; translations are applied in closed form.
pub fn integrate_trajectory<const N: usize>(
    protocol: &VelocityProtocol,
    x0: [f64; N],
    t0: f64,
    t1: f64,
    opts: &FlowOptions,
) -> Result<TrajectoryEnd<N>, FlowError> {
    let mut x = x0;
    let mut t = t0;
    let mut error = 0.0f64;
    let mut steps = 0;
    trajectory_legs(
        protocol,
        &mut x,
        &mut t,
        t1,
        opts,
        &mut error,
        &mut steps,
        |_, _| {},
    )?;
    Ok(TrajectoryEnd {
        x: wrap(protocol.domain, x),
        error,
        steps,
    })
}

#[allow(clippy::too_many_arguments)]
fn trajectory_legs<const N: usize>(
    protocol: &VelocityProtocol,
    x: &mut [f64; N],
    t: &mut f64,
    t1: f64,
    opts: &FlowOptions,
    error: &mut f64,
    steps: &mut usize,
    mut on_step: impl FnMut(f64, &[f64; N]),
) -> Result<(), FlowError> {
    if protocol.dim != N {
        return Err(FlowError::Dimension {
            expected: protocol.dim,
            got: N,
        });
    }
    let forward = t1 >= *t;
    let ode = OdeOptions {
        rtol: opts.tol,
        atol: opts.tol,
        max_steps: opts.max_steps,
        ..Default::default()
    };
    while *t != t1 {
        let (k, edge) = piece(protocol, *t, forward);
        let end = if forward { edge.min(t1) } else { edge.max(t1) };
        if let Some(c) = protocol.constant(k) {
            let dt = end - *t;
            for i in 0..N {
                x[i] += c[i] * dt;
            }
            *t = end;
            on_step(*t, x);
            continue;
        }
        let field = |_: f64, y: &[f64; N]| {
            let mut u = [0.0; N];
            match protocol.eval_segment(k, y, &mut u) {
                Ok(()) => u,
                Err(_) => [f64::NAN; N],
            }
        };
        let limit = |y: &[f64; N]| {
            if opts.clamp <= 0.0 {
                return f64::INFINITY;
            }
            let mut u = [0.0; N];
            if protocol.eval_segment(k, y, &mut u).is_err() {
                return f64::INFINITY;
            }
            let mut gaps = [0.0; N];
            protocol.edge_gaps(k, y, &mut gaps);
            (0..N)
                .map(|a| opts.clamp * gaps[a] / u[a].abs())
                .fold(f64::INFINITY, f64::min)
        };
        let result = integrate_limited(field, *t, *x, end, &ode, limit, |s| {
            *error = error.max(s.err * opts.tol);
            on_step(s.t1, s.y1);
            Control::Continue
        });
        match result {
            Ok((_, y, stats)) => {
                *x = y;
                *t = end;
                *steps += stats.accepted;
            }
            Err(OdeError::StepUnderflow(at)) | Err(OdeError::NonFinite(at)) => {
                return Err(FlowError::BoundaryStall {
                    x: x.to_vec(),
                    t: at,
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

/// `Φ_t` at a set of points: images and per-point error estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowMapSample {
    pub t: f64,
    pub points: Vec<Vec<f64>>,
    pub images: Vec<Vec<f64>>,
    pub errors: Vec<f64>,
}

pub fn flow_map<const N: usize>(
    protocol: &VelocityProtocol,
    points: &[[f64; N]],
    t: f64,
    opts: &FlowOptions,
) -> Result<FlowMapSample, FlowError> {
    let ends: Vec<TrajectoryEnd<N>> = points
        .par_iter()
        .map(|&p| integrate_trajectory(protocol, p, 0.0, t, opts))
        .collect::<Result<_, _>>()?;
    Ok(FlowMapSample {
        t,
        points: points.iter().map(|p| p.to_vec()).collect(),
        images: ends.iter().map(|e| e.x.to_vec()).collect(),
        errors: ends.iter().map(|e| e.error).collect(),
    })
}

/// Cell centres of a `per_axis^N` lattice on `[margin, 1 - margin]^N`.
pub fn interior_samples<const N: usize>(per_axis: usize, margin: f64) -> Vec<[f64; N]> {
    let h = (1.0 - 2.0 * margin) / per_axis as f64;
    let total = per_axis.pow(N as u32);
    (0..total)
        .map(|mut flat| {
            let mut p = [0.0; N];
            for v in p.iter_mut() {
                *v = margin + (flat % per_axis) as f64 * h + 0.5 * h;
                flat /= per_axis;
            }
            p
        })
        .collect()
}

/// Distance in the cube, or in the flat torus.
pub fn distance(domain: Domain, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs();
            let d = if domain == Domain::Torus {
                d.min(1.0 - d)
            } else {
                d
            };
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Exact image of a binary floating-point point under `map^steps`.
pub fn apply_map_f64(
    map: &PiecewiseDyadicAffineMap,
    x: &[f64],
    steps: usize,
) -> Result<Vec<f64>, FlowError> {
    let mut p = x
        .iter()
        .map(|&v| {
            DyadicRational::from_f64(v)
                .ok_or_else(|| FlowError::Parameter(format!("non-finite coordinate {v}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    for _ in 0..steps {
        p = map.apply(&p)?;
    }
    Ok(p.into_iter().map(DyadicRational::to_f64).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowComparison {
    pub t: f64,
    pub map: String,
    pub samples: usize,
    pub max_error: f64,
    pub mean_error: f64,
    pub worst_point: Vec<f64>,
    pub max_integrator_error: f64,
    pub orientation_flip: bool,
}

/// `max |Φ_t(x) - map^{t/period}(x)|` over `samples`; `t` must be a whole number of periods.
pub fn flow_map_vs_discrete<const N: usize>(
    protocol: &VelocityProtocol,
    map: &PiecewiseDyadicAffineMap,
    t: f64,
    samples: &[[f64; N]],
    opts: &FlowOptions,
) -> Result<FlowComparison, FlowError> {
    if map.dim != N {
        return Err(FlowError::Dimension {
            expected: map.dim,
            got: N,
        });
    }
    let periods = t / protocol.period;
    if !(periods >= 0.0 && periods.fract() == 0.0) {
        return Err(FlowError::Parameter(format!(
            "t = {t} is not a whole number of periods"
        )));
    }
    let flow = flow_map(protocol, samples, t, opts)?;
    let exact = samples
        .par_iter()
        .map(|p| apply_map_f64(map, p, periods as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let errs: Vec<f64> = flow
        .images
        .iter()
        .zip(&exact)
        .map(|(a, b)| distance(protocol.domain, a, b))
        .collect();
    let (worst, max_error) =
        errs.iter().enumerate().fold(
            (0, 0.0f64),
            |(wi, m), (i, &e)| if e > m { (i, e) } else { (wi, m) },
        );
    Ok(FlowComparison {
        t,
        map: map.label.clone(),
        samples: samples.len(),
        max_error,
        mean_error: if errs.is_empty() {
            0.0
        } else {
            errs.iter().sum::<f64>() / errs.len() as f64
        },
        worst_point: samples.get(worst).map(|p| p.to_vec()).unwrap_or_default(),
        max_integrator_error: flow.errors.iter().cloned().fold(0.0, f64::max),
        orientation_flip: protocol.orientation_flip,
    })
}

/// Positions at the given times (ascending from `0`), one row per time.
pub fn sample_trajectory<const N: usize>(
    protocol: &VelocityProtocol,
    x0: [f64; N],
    times: &[f64],
    opts: &FlowOptions,
) -> Result<Vec<[f64; N]>, FlowError> {
    let mut out = Vec::with_capacity(times.len());
    let mut x = x0;
    let mut t = 0.0;
    let (mut error, mut steps) = (0.0, 0);
    for &s in times {
        trajectory_legs(
            protocol,
            &mut x,
            &mut t,
            s,
            opts,
            &mut error,
            &mut steps,
            |_, _| {},
        )?;
        out.push(wrap(protocol.domain, x));
    }
    Ok(out)
}

/// CSV with header `t,x1,...,xd`.
pub fn write_trajectory_csv<W: Write, const N: usize>(
    mut w: W,
    times: &[f64],
    xs: &[[f64; N]],
) -> std::io::Result<()> {
    let header: Vec<String> = (1..=N).map(|i| format!("x{i}")).collect();
    writeln!(w, "t,{}", header.join(","))?;
    for (t, x) in times.iter().zip(xs) {
        let row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{t},{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_has_margin() {
        let s = interior_samples::<2>(32, 1.0 / 32.0);
        assert_eq!(s.len(), 1024);
        assert!(s
            .iter()
            .flatten()
            .all(|&v| v > 1.0 / 32.0 && v < 31.0 / 32.0));
    }

    #[test]
    fn torus_distance_wraps() {
        assert!((distance(Domain::Torus, &[0.01, 0.5], &[0.99, 0.5]) - 0.02).abs() < 1e-15);
        assert!((distance(Domain::Box, &[0.01, 0.5], &[0.99, 0.5]) - 0.98).abs() < 1e-15);
    }
}
