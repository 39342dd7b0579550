//! Hölder continuity of the flow maps `Φ_t`, uniformly in `t ∈ [0, 1]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{distance, trajectory_legs, FlowError, FlowOptions};
use crate::stream::VelocityProtocol;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HolderRegion {
    /// Pairs at scale `2^-j` sitting at distance `~2^-j` from the corner `(0, 0)`.
    Corner,
    /// Pairs at distance `2^-j` around fixed points away from every patch edge.
    Interior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub region: HolderRegion,
    pub scales: Vec<u32>,
    pub distances: Vec<f64>,
    /// `sup_t sup_pairs |Φ_t(x) - Φ_t(y)|` per scale.
    pub max_displacement: Vec<f64>,
    /// `max_displacement / distance` per scale.
    pub ratios: Vec<f64>,
    pub beta: f64,
    pub constant: f64,
    /// Slopes between consecutive scales.
    pub local_slopes: Vec<f64>,
    /// Every local slope within 20% of `beta`.
    pub stable: bool,
    pub checkpoints_per_segment: usize,
}

pub const CHECKPOINTS_PER_SEGMENT: usize = 64;

fn pairs(region: HolderRegion, j: u32) -> Vec<([f64; 2], [f64; 2])> {
    let d = 2f64.powi(-(j as i32));
    match region {
        HolderRegion::Corner => {
            let at = |a: f64, b: f64| [a * d, b * d];
            vec![
                (at(1.0, 1.0), at(2.0, 1.0)),
                (at(1.0, 1.0), at(1.0, 2.0)),
                (at(1.0, 2.0), at(2.0, 2.0)),
                (at(2.0, 1.0), at(2.0, 2.0)),
            ]
        }
        HolderRegion::Interior => {
            let (c, s) = (0.3f64.cos(), 0.3f64.sin());
            [[0.23, 0.41], [0.31, 0.62], [0.68, 0.37], [0.77, 0.58]]
                .into_iter()
                .map(|p| (p, [p[0] + d * c, p[1] + d * s]))
                .collect()
        }
    }
}

/// Positions at `CHECKPOINTS_PER_SEGMENT` equally spaced times inside every segment of `[0, 1]`.
fn checkpoints(protocol: &VelocityProtocol) -> Vec<f64> {
    let mut out = Vec::new();
    let mut base = 0.0;
    while base < 1.0 {
        for s in &protocol.schedule {
            let (a, b) = (base + s.start, (base + s.end).min(1.0));
            if a >= 1.0 {
                break;
            }
            for m in 1..=CHECKPOINTS_PER_SEGMENT {
                out.push(a + (b - a) * m as f64 / CHECKPOINTS_PER_SEGMENT as f64);
            }
        }
        base += protocol.period;
    }
    out
}

fn pair_sup(
    protocol: &VelocityProtocol,
    x: [f64; 2],
    y: [f64; 2],
    times: &[f64],
    opts: &FlowOptions,
) -> Result<f64, FlowError> {
    let (mut px, mut py) = (x, y);
    let (mut tx, mut ty) = (0.0, 0.0);
    let (mut e, mut n) = (0.0, 0);
    let mut sup = distance(protocol.domain, &x, &y);
    for &t in times {
        trajectory_legs(
            protocol,
            &mut px,
            &mut tx,
            t,
            opts,
            &mut e,
            &mut n,
            |_, _| {},
        )?;
        trajectory_legs(
            protocol,
            &mut py,
            &mut ty,
            t,
            opts,
            &mut e,
            &mut n,
            |_, _| {},
        )?;
        sup = sup.max(distance(protocol.domain, &px, &py));
    }
    Ok(sup)
}

/// Fits `sup_t |Φ_t(x) - Φ_t(y)| ≈ C |x - y|^β` over pairs at distances `2^-j`.
pub fn holder_probe(
    protocol: &VelocityProtocol,
    region: HolderRegion,
    scales: &[u32],
    opts: &FlowOptions,
) -> Result<HolderReport, FlowError> {
    if scales.len() < 5 {
        return Err(FlowError::Parameter(format!(
            "need at least 5 scales, got {}",
            scales.len()
        )));
    }
    if protocol.dim != 2 {
        return Err(FlowError::Dimension {
            expected: 2,
            got: protocol.dim,
        });
    }
    let times = checkpoints(protocol);
    let jobs: Vec<(usize, [f64; 2], [f64; 2])> = scales
        .iter()
        .enumerate()
        .flat_map(|(i, &j)| pairs(region, j).into_iter().map(move |(x, y)| (i, x, y)))
        .collect();
    let sups: Vec<(usize, f64)> = jobs
        .par_iter()
        .map(|&(i, x, y)| pair_sup(protocol, x, y, &times, opts).map(|s| (i, s)))
        .collect::<Result<_, _>>()?;
    let distances: Vec<f64> = scales.iter().map(|&j| 2f64.powi(-(j as i32))).collect();
    let mut max_displacement = vec![0.0f64; scales.len()];
    for (i, s) in sups {
        max_displacement[i] = max_displacement[i].max(s);
    }
    let ratios: Vec<f64> = max_displacement
        .iter()
        .zip(&distances)
        .map(|(m, d)| m / d)
        .collect();
    let lx: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = max_displacement.iter().map(|d| d.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let beta = sxy / sxx;
    let constant = (my - beta * mx).exp();
    let local_slopes: Vec<f64> = (1..lx.len())
        .map(|i| (ly[i] - ly[i - 1]) / (lx[i] - lx[i - 1]))
        .collect();
    let stable = beta > 0.0 && local_slopes.iter().all(|s| (s / beta - 1.0).abs() <= 0.2);
    Ok(HolderReport {
        region,
        scales: scales.to_vec(),
        distances,
        max_displacement,
        ratios,
        beta,
        constant,
        local_slopes,
        stable,
        checkpoints_per_segment: CHECKPOINTS_PER_SEGMENT,
    })
}
