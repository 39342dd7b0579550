//! Semi-Lagrangian transport of a cell field along a protocol.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{integrate_trajectory, FlowError, FlowOptions};
use crate::dyadic::PiecewiseDyadicAffineMap;
use crate::field::{pullback_exact, Domain, ScalarGrid};
use crate::stream::VelocityProtocol;
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Multilinear interpolation between cell centres.
    Bilinear,
    /// The cell value at the foot point (the grid read as a piecewise-constant function).
    PiecewiseConstant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvectMode {
    /// Trace every cell centre back to time 0.
    SemiLagrangian,
    /// Whole periods by the exact map, then trace back over the remainder in `[0, period)`.
    Hybrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvectOptions {
    pub flow: FlowOptions,
    pub mode: AdvectMode,
    pub sampling: Sampling,
}

impl Default for AdvectOptions {
    fn default() -> Self {
        Self {
            flow: FlowOptions::default(),
            mode: AdvectMode::Hybrid,
            sampling: Sampling::Bilinear,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Advected<F> {
    pub grid: ScalarGrid<F>,
    /// Exact periods applied before tracing.
    pub exact_periods: usize,
    /// Cells whose back-trace stalled; their values come from the nearest traced cell.
    pub stalled: Vec<usize>,
}

/// Times within this fraction of a period of a whole period count as whole periods.
const WHOLE_PERIOD_SNAP: f64 = 1e-12;

/// `ρ(·, t) = f ∘ Φ_t^{-1}`. In hybrid mode `map` (the time-one map of one period) supplies
/// `f ∘ M^{-n}` exactly and only the remainder is traced.
pub fn advect_scalar<F: Real>(
    grid: &ScalarGrid<F>,
    protocol: &VelocityProtocol,
    map: Option<&PiecewiseDyadicAffineMap>,
    t: f64,
    opts: &AdvectOptions,
) -> Result<Advected<F>, FlowError> {
    if !(t >= 0.0) {
        return Err(FlowError::Parameter(format!("negative time {t}")));
    }
    if grid.dim() != protocol.dim {
        return Err(FlowError::Dimension {
            expected: protocol.dim,
            got: grid.dim(),
        });
    }
    if t == 0.0 {
        return Ok(Advected {
            grid: grid.clone(),
            exact_periods: 0,
            stalled: Vec::new(),
        });
    }
    let (source, periods, remainder) = match opts.mode {
        AdvectMode::SemiLagrangian => (grid.clone(), 0, t),
        AdvectMode::Hybrid => {
            let map = map.ok_or_else(|| {
                FlowError::Parameter("hybrid advection needs the period map".into())
            })?;
            let n = (t / protocol.period + WHOLE_PERIOD_SNAP).floor() as usize;
            let rest = (t - n as f64 * protocol.period).max(0.0);
            (pullback_exact(grid, map, n)?, n, rest)
        }
    };
    if remainder <= WHOLE_PERIOD_SNAP * protocol.period {
        return Ok(Advected {
            grid: source,
            exact_periods: periods,
            stalled: Vec::new(),
        });
    }
    let (values, stalled) = match grid.dim() {
        2 => trace::<F, 2>(&source, protocol, remainder, opts)?,
        3 => trace::<F, 3>(&source, protocol, remainder, opts)?,
        d => {
            return Err(FlowError::Dimension {
                expected: 2,
                got: d,
            })
        }
    };
    Ok(Advected {
        grid: grid.with_values(values),
        exact_periods: periods,
        stalled,
    })
}

fn trace<F: Real, const N: usize>(
    source: &ScalarGrid<F>,
    protocol: &VelocityProtocol,
    s: f64,
    opts: &AdvectOptions,
) -> Result<(Vec<F>, Vec<usize>), FlowError> {
    let feet: Vec<Option<[f64; N]>> = (0..source.len())
        .into_par_iter()
        .map(|flat| {
            let c = source.cell_center(flat);
            let mut x = [0.0; N];
            for (xi, ci) in x.iter_mut().zip(c) {
                *xi = ci.to_f64().unwrap_or(f64::NAN);
            }
            match integrate_trajectory(protocol, x, s, 0.0, &opts.flow) {
                Ok(end) => Ok(Some(end.x)),
                Err(FlowError::BoundaryStall { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, _>>()?;
    let mut values: Vec<Option<F>> = feet
        .iter()
        .map(|f| f.map(|x| sample(source, &x, opts.sampling)))
        .collect();
    let stalled: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_none()).collect();
    if stalled.len() == values.len() {
        return Err(FlowError::BoundaryStall {
            x: Vec::new(),
            t: s,
        });
    }
    let filled: Vec<(usize, F)> = stalled
        .iter()
        .map(|&i| (i, nearest_valid(source, &values, i)))
        .collect();
    for (i, v) in filled {
        values[i] = Some(v);
    }
    Ok((
        values
            .into_iter()
            .map(|v| v.unwrap_or_else(F::zero))
            .collect(),
        stalled,
    ))
}

fn nearest_valid<F: Real>(grid: &ScalarGrid<F>, values: &[Option<F>], flat: usize) -> F {
    let side = grid.side() as i64;
    let centre: Vec<i64> = grid
        .multi_index(flat)
        .into_iter()
        .map(|i| i as i64)
        .collect();
    let d = centre.len();
    for radius in 1..side {
        let width = 2 * radius + 1;
        for code in 0..width.pow(d as u32) {
            let mut c = code;
            let mut idx = Vec::with_capacity(d);
            let mut on_shell = false;
            for &ci in &centre {
                let off = c % width - radius;
                c /= width;
                on_shell |= off.abs() == radius;
                idx.push(ci + off);
            }
            if !on_shell || idx.iter().any(|&i| i < 0 || i >= side) {
                continue;
            }
            let idx: Vec<usize> = idx.into_iter().map(|i| i as usize).collect();
            if let Some(v) = values[grid.flat_index(&idx)] {
                return v;
            }
        }
    }
    F::zero()
}

/// Value of the grid at `x` under the chosen reconstruction. Off-grid neighbours are clamped
/// to the edge on the box and wrapped on the torus.
fn sample<F: Real, const N: usize>(grid: &ScalarGrid<F>, x: &[f64; N], mode: Sampling) -> F {
    let side = grid.side() as i64;
    let fix = |i: i64| -> usize {
        match grid.domain() {
            Domain::Torus => i.rem_euclid(side) as usize,
            Domain::Box => i.clamp(0, side - 1) as usize,
        }
    };
    match mode {
        Sampling::PiecewiseConstant => {
            let idx: Vec<usize> = x
                .iter()
                .map(|&v| fix((v * side as f64).floor() as i64))
                .collect();
            grid.get(&idx)
        }
        Sampling::Bilinear => {
            let mut base = [0i64; N];
            let mut w = [0.0f64; N];
            for a in 0..N {
                let u = x[a] * side as f64 - 0.5;
                let f = u.floor();
                base[a] = f as i64;
                w[a] = u - f;
            }
            let mut acc = F::zero();
            let mut idx = vec![0usize; N];
            for corner in 0..(1usize << N) {
                let mut weight = 1.0;
                for a in 0..N {
                    let bit = (corner >> a) & 1;
                    weight *= if bit == 1 { w[a] } else { 1.0 - w[a] };
                    idx[a] = fix(base[a] + bit as i64);
                }
                if weight != 0.0 {
                    acc += F::lit(weight) * grid.get(&idx);
                }
            }
            acc
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_reproduces_linear_data_away_from_the_edge() {
        let g = ScalarGrid::<f64>::from_fn(2, 4, Domain::Box, |i| i[0] as f64 + 2.0 * i[1] as f64);
        let h = 1.0 / 16.0;
        let x = [5.3 * h, 7.9 * h];
        let v = sample(&g, &x, Sampling::Bilinear);
        assert!((v - ((5.3 - 0.5) + 2.0 * (7.9 - 0.5))).abs() < 1e-12);
        assert_eq!(sample(&g, &x, Sampling::PiecewiseConstant), 5.0 + 14.0);
    }

    #[test]
    fn nearest_valid_finds_a_neighbour() {
        let g = ScalarGrid::<f64>::from_fn(2, 2, Domain::Box, |i| (i[0] + 4 * i[1]) as f64);
        let mut values: Vec<Option<f64>> = g.values().iter().map(|&v| Some(v)).collect();
        values[5] = None;
        values[4] = None;
        let v = nearest_valid(&g, &values, 5);
        assert!(v != 5.0 && v != 4.0);
    }
}
