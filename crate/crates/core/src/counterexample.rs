//! Initial data that the maps mix at no prescribed rate: a half-measure set whose `n_j`-th
//! image contains a ball of volume `λ_{n_j}` for every `j`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::{
    boxes_from_bounds, equidistribution_horizon, DyadicError, DyadicRational,
    PiecewiseDyadicAffineMap, DEFAULT_DEPTH_CAP,
};
use crate::field::{pullback_series, Domain, FieldError, PullbackOptions, ScalarGrid};
use crate::metrics::{ball_average_at, geometric_scale, mix_norm, MetricsError};
use crate::Real;

#[derive(Debug, Error)]
pub enum CounterexampleError {
    #[error("V_d Σ λ_(n_j) = {bound} exceeds 1/2")]
    Infeasible { bound: f64 },
    #[error("ball {j} has radius {radius}, under 4 cells of width {cell}")]
    ResolutionTooCoarse { j: usize, radius: f64, cell: f64 },
    #[error("designated preimages cover {marked} cells, more than half ({half})")]
    Overfull { marked: usize, half: usize },
    #[error("{0}")]
    Parameter(String),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// `λ_n` for `n ≥ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSequence {
    /// `e^{-decay·n}`.
    Exponential {
        decay: f64,
    },
    /// `2^{-n}`, summed exactly.
    Pow2,
    Constant(f64),
    /// `λ_1, λ_2, …`; undefined past the end.
    List(Vec<f64>),
}

impl RateSequence {
    pub fn rate(&self, n: usize) -> Option<f64> {
        match self {
            Self::Exponential { decay } => Some((-decay * n as f64).exp()),
            Self::Pow2 => Some((-(n as f64)).exp2()),
            Self::Constant(c) => Some(*c),
            Self::List(v) => n.checked_sub(1).and_then(|i| v.get(i)).copied(),
        }
    }
}

/// The times `n_j`, `j ≥ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsequence {
    /// `n_j = j + offset` for every `j ≥ 1`.
    Offset(usize),
    List(Vec<usize>),
}

impl Subsequence {
    pub fn time(&self, j: usize) -> Option<usize> {
        match self {
            Self::Offset(o) => (j >= 1).then_some(j + o),
            Self::List(v) => j.checked_sub(1).and_then(|i| v.get(i)).copied(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadSetSpec {
    pub rates: RateSequence,
    pub times: Subsequence,
    /// Balls rasterized: `j = 1..=terms`.
    pub terms: usize,
    /// Defaults to the centre of the domain.
    pub center: Option<Vec<f64>>,
    pub dim: usize,
    /// Grid level `n`: `2^n` cells per side.
    pub n: u32,
    /// Samples per cell and axis; at least 4.
    pub samples_per_axis: usize,
}

impl BadSetSpec {
    pub fn new(rates: RateSequence, times: Subsequence, terms: usize, dim: usize, n: u32) -> Self {
        Self {
            rates,
            times,
            terms,
            center: None,
            dim,
            n,
            samples_per_axis: 4,
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.center.clone().unwrap_or_else(|| vec![0.5; self.dim])
    }

    /// `(n_j, λ_{n_j})` for `j = 1..=terms`.
    pub fn balls(&self) -> Result<Vec<(usize, f64)>, CounterexampleError> {
        (1..=self.terms)
            .map(|j| {
                let nj = self
                    .times
                    .time(j)
                    .ok_or_else(|| CounterexampleError::Parameter(format!("no time n_{j}")))?;
                let lambda = self
                    .rates
                    .rate(nj)
                    .ok_or_else(|| CounterexampleError::Parameter(format!("no rate λ_{nj}")))?;
                Ok((nj, lambda))
            })
            .collect()
    }
}

/// `V_d`, rounded up.
fn unit_ball_volume_upper(dim: usize) -> Result<f64, CounterexampleError> {
    let v = match dim {
        2 => std::f64::consts::PI,
        3 => 4.0 / 3.0 * std::f64::consts::PI,
        _ => {
            return Err(CounterexampleError::Parameter(format!(
                "dimension {dim} unsupported"
            )))
        }
    };
    Ok(v.next_up())
}

/// Rounds a non-negative sum of `terms` correctly rounded operations up past its error.
fn inflate(x: f64, ops: usize) -> f64 {
    (x * (1.0 + (ops as f64 + 2.0) * f64::EPSILON)).next_up()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// `Σ_j λ_{n_j}` over the whole subsequence.
    pub sum: f64,
    /// Upper bound on `V_d Σ_j λ_{n_j}`.
    pub bound: f64,
    /// The sum is exact (dyadic rates).
    pub exact: bool,
    pub feasible: bool,
}

/// `V_d Σ_j λ_{n_j} ≤ 1/2`, exact for dyadic rates and rounded upward otherwise.
pub fn feasibility(spec: &BadSetSpec) -> Result<Feasibility, CounterexampleError> {
    let vd = unit_ball_volume_upper(spec.dim)?;
    let (sum, exact) = match (&spec.rates, &spec.times) {
        (RateSequence::Pow2, Subsequence::Offset(o)) => {
            (DyadicRational::new(1, *o as u32).to_f64(), true)
        }
        (RateSequence::Pow2, Subsequence::List(ns)) => {
            let s = ns.iter().fold(DyadicRational::ZERO, |s, &n| {
                s + DyadicRational::new(1, n as u32)
            });
            let v = s.to_f64();
            let exact = DyadicRational::from_f64(v) == Some(s);
            (if exact { v } else { v.next_up() }, exact)
        }
        (RateSequence::Exponential { decay }, Subsequence::Offset(o)) => {
            if !(*decay > 0.0) {
                (f64::INFINITY, false)
            } else {
                let q = (-decay).exp();
                (
                    inflate((-decay * (*o as f64 + 1.0)).exp() / (1.0 - q), 6),
                    false,
                )
            }
        }
        (RateSequence::Constant(c), Subsequence::Offset(_)) => {
            (if *c > 0.0 { f64::INFINITY } else { 0.0 }, *c == 0.0)
        }
        (rates, Subsequence::Offset(o)) => {
            // A finite list of rates: the subsequence stops where the list does.
            let terms: Vec<f64> = (1..).map_while(|j| rates.rate(j + o)).collect();
            (inflate(terms.iter().sum(), terms.len()), false)
        }
        (rates, Subsequence::List(ns)) => {
            let terms = ns
                .iter()
                .map(|&n| {
                    rates
                        .rate(n)
                        .ok_or_else(|| CounterexampleError::Parameter(format!("no rate λ_{n}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            (inflate(terms.iter().sum(), terms.len()), false)
        }
    };
    let bound = if sum.is_finite() {
        inflate(vd * sum, 1)
    } else {
        f64::INFINITY
    };
    Ok(Feasibility {
        sum,
        bound,
        exact,
        feasible: bound <= 0.5,
    })
}

/// A branch evaluated in binary floating point; exact while the dyadic bits fit a mantissa.
struct FastBranch {
    lo: [f64; 3],
    hi: [f64; 3],
    perm: [usize; 3],
    scale: [f64; 3],
    trans: [f64; 3],
}

struct FastMap {
    dim: usize,
    branches: Vec<FastBranch>,
}

impl FastMap {
    fn new(map: &PiecewiseDyadicAffineMap) -> Self {
        let branches = map
            .branches
            .iter()
            .map(|b| {
                let mut fb = FastBranch {
                    lo: [0.0; 3],
                    hi: [0.0; 3],
                    perm: [0; 3],
                    scale: [0.0; 3],
                    trans: [0.0; 3],
                };
                for i in 0..map.dim {
                    fb.lo[i] = b.domain.axes[i].lo().to_f64();
                    fb.hi[i] = b.domain.axes[i].hi().to_f64();
                    fb.perm[i] = b.affine.perm[i];
                    fb.scale[i] = f64::from(b.affine.sign[i]) * f64::from(b.affine.exp[i]).exp2();
                    fb.trans[i] = b.affine.trans[i].to_f64();
                }
                fb
            })
            .collect();
        Self {
            dim: map.dim,
            branches,
        }
    }

    fn apply(&self, x: &mut [f64; 3]) -> bool {
        let d = self.dim;
        let Some(b) = self
            .branches
            .iter()
            .find(|b| (0..d).all(|i| b.lo[i] < x[i] && x[i] < b.hi[i]))
        else {
            return false;
        };
        let src = *x;
        for i in 0..d {
            x[i] = b.scale[i] * src[b.perm[i]] + b.trans[i];
        }
        true
    }
}

/// Cells that can meet `map^{-steps}` of the box `[c - ρ, c + ρ]`, by exact box iteration.
fn candidate_cells(
    map: &PiecewiseDyadicAffineMap,
    inverse: &PiecewiseDyadicAffineMap,
    center: &[f64],
    radius: f64,
    steps: usize,
    n: u32,
) -> Result<Vec<bool>, CounterexampleError> {
    let dim = map.dim;
    let side = 1usize << n;
    let total = side.pow(dim as u32);
    let wraps = map.is_torus() && center.iter().any(|&c| c - radius < 0.0 || c + radius > 1.0);
    if wraps {
        return Ok(vec![true; total]);
    }
    let bounds: Vec<(DyadicRational, DyadicRational)> = center
        .iter()
        .map(|&c| {
            let lo = ((c - radius) * side as f64).floor().max(0.0) as i128;
            let hi = ((c + radius) * side as f64).ceil().min(side as f64) as i128;
            (DyadicRational::new(lo, n), DyadicRational::new(hi, n))
        })
        .collect();
    let mut mask = vec![false; total];
    for b in boxes_from_bounds(&bounds) {
        for piece in inverse.iterate_box(&b, steps, DEFAULT_DEPTH_CAP)? {
            let ranges: Vec<(usize, usize)> = piece
                .axes
                .iter()
                .map(|iv| {
                    let lo = (iv.lo().to_f64() * side as f64).floor() as usize;
                    let hi = ((iv.hi().to_f64() * side as f64).ceil() as usize).min(side);
                    (lo, hi)
                })
                .collect();
            let count: usize = ranges.iter().map(|r| r.1 - r.0).product();
            for flat in 0..count {
                let (mut rest, mut idx, mut stride) = (flat, 0usize, 1usize);
                for r in &ranges {
                    let len = r.1 - r.0;
                    idx += (r.0 + rest % len) * stride;
                    rest /= len;
                    stride *= side;
                }
                mask[idx] = true;
            }
        }
    }
    Ok(mask)
}

fn distance(a: &[f64], b: &[f64], torus: bool) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs();
            let d = if torus { d.min(1.0 - d) } else { d };
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn cell_center(flat: usize, side: usize, dim: usize) -> Vec<f64> {
    let h = 1.0 / side as f64;
    let mut rest = flat;
    (0..dim)
        .map(|_| {
            let i = rest % side;
            rest /= side;
            (i as f64 + 0.5) * h
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct BadSet<F> {
    /// `χ_A - χ_{A^c}`.
    pub field: ScalarGrid<F>,
    /// Cells put in `A` because a sample reaches one of the balls.
    pub designated: usize,
    /// Cells added to reach half measure.
    pub padding: usize,
    pub feasibility: Feasibility,
}

/// `A ⊇ ∪_j map^{-n_j}(B_{λ_{n_j}^{1/d}}(center))`, padded to half measure from the far corner.
///
/// A cell joins `A` when one of its `samples_per_axis^d` sample points lands in a ball
/// after `n_j` exact steps.
pub fn construct_bad_set<F: Real>(
    spec: &BadSetSpec,
    map: &PiecewiseDyadicAffineMap,
) -> Result<BadSet<F>, CounterexampleError> {
    if map.dim != spec.dim {
        return Err(CounterexampleError::Parameter(format!(
            "map of dimension {} for a {}-d set",
            map.dim, spec.dim
        )));
    }
    if spec.samples_per_axis < 4 {
        return Err(CounterexampleError::Parameter(format!(
            "{} samples per axis, need at least 4",
            spec.samples_per_axis
        )));
    }
    let feas = feasibility(spec)?;
    if !feas.feasible {
        return Err(CounterexampleError::Infeasible { bound: feas.bound });
    }
    let center = spec.center();
    if center.len() != spec.dim || center.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(CounterexampleError::Parameter(format!(
            "centre {center:?} outside the unit cube"
        )));
    }
    let dim = spec.dim;
    let side = 1usize << spec.n;
    let total = side.pow(dim as u32);
    let torus = map.is_torus();
    let fast = FastMap::new(map);
    let inverse = map.inverse();
    let s = spec.samples_per_axis;
    let per_cell = s.pow(dim as u32);
    let h = 1.0 / side as f64;

    let mut marked = vec![false; total];
    for (nj, lambda) in spec.balls()? {
        let radius = lambda.powf(1.0 / dim as f64);
        let candidates = candidate_cells(map, &inverse, &center, radius, nj, spec.n)?;
        let hits: Vec<usize> = (0..total)
            .into_par_iter()
            .filter(|&c| candidates[c] && !marked[c])
            .filter(|&c| {
                let lo = cell_center(c, side, dim);
                (0..per_cell).any(|k| {
                    let mut x = [0.0; 3];
                    let mut rest = k;
                    for a in 0..dim {
                        let sub = rest % s;
                        rest /= s;
                        x[a] = lo[a] - 0.5 * h + (sub as f64 + 0.5) * h / s as f64;
                    }
                    (0..nj).all(|_| fast.apply(&mut x))
                        && distance(&x[..dim], &center, torus) < radius
                })
            })
            .collect();
        for c in hits {
            marked[c] = true;
        }
    }

    let designated = marked.iter().filter(|&&m| m).count();
    let half = total / 2;
    if designated > half {
        return Err(CounterexampleError::Overfull {
            marked: designated,
            half,
        });
    }
    let mut free: Vec<(f64, usize)> = (0..total)
        .filter(|&c| !marked[c])
        .map(|c| (distance(&cell_center(c, side, dim), &center, torus), c))
        .collect();
    free.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let padding = half - designated;
    for &(_, c) in &free[..padding] {
        marked[c] = true;
    }
    let domain = if torus { Domain::Torus } else { Domain::Box };
    let values = marked
        .iter()
        .map(|&m| if m { F::one() } else { -F::one() })
        .collect();
    Ok(BadSet {
        field: ScalarGrid::new(dim, spec.n, domain, values)?,
        designated,
        padding,
        feasibility: feas,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoRateRow {
    pub j: usize,
    pub n_j: usize,
    pub lambda: f64,
    pub radius: f64,
    /// Average of `f ∘ map^{-n_j}` over the designated ball.
    pub ball_average: f64,
    /// Geometric mixing scale at `κ = 1/2`.
    pub geometric_scale: f64,
    pub mix_norm: f64,
    /// `√V_d (ρ/2)^{(d+1)/2}`, the mix-norm of a field equal to 1 on `B_ρ`, restricted to
    /// centres in `B_{ρ/2}` and radii below `ρ/2`.
    pub mix_norm_floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoRateReport {
    pub map: String,
    pub dim: usize,
    pub n: u32,
    pub center: Vec<f64>,
    pub feasibility: Feasibility,
    pub designated_cells: usize,
    pub padding_cells: usize,
    pub rows: Vec<NoRateRow>,
    /// `n_{j_max} + LATE_STEPS`.
    pub late_step: usize,
    pub late_mix_norm: f64,
    /// Equidistribution horizon used for the late step, when the map is recognised.
    pub mixing_horizon: Option<usize>,
    /// Every ball average is at least `BALL_AVERAGE_MIN`, every geometric scale exceeds
    /// `λ_{n_j}`, every mix-norm clears its floor, and the late mix-norm is smaller.
    pub pass: bool,
}

pub const BALL_AVERAGE_MIN: f64 = 0.95;
pub const GEOMETRIC_KAPPA: f64 = 0.5;
pub const LATE_STEPS: usize = 20;

/// Pushes the bad set forward `n_j` steps for `j ≤ j_max` and records how unmixed it stays.
pub fn demonstrate_no_rate(
    spec: &BadSetSpec,
    map: &PiecewiseDyadicAffineMap,
    j_max: usize,
) -> Result<NoRateReport, CounterexampleError> {
    if j_max == 0 || j_max > spec.terms {
        return Err(CounterexampleError::Parameter(format!(
            "j_max {j_max} outside 1..={}",
            spec.terms
        )));
    }
    let balls: Vec<(usize, f64)> = spec.balls()?.into_iter().take(j_max).collect();
    let h = (-(spec.n as f64)).exp2();
    let dim = spec.dim;
    for (j, &(_, lambda)) in balls.iter().enumerate() {
        let radius = lambda.powf(1.0 / dim as f64);
        if radius < 4.0 * h {
            return Err(CounterexampleError::ResolutionTooCoarse {
                j: j + 1,
                radius,
                cell: h,
            });
        }
    }
    let set = construct_bad_set::<f64>(spec, map)?;
    let center = spec.center();
    let late_step = balls.last().map_or(0, |b| b.0) + LATE_STEPS;
    let mut steps: Vec<usize> = balls.iter().map(|b| b.0).collect();
    steps.push(late_step);
    // Past the horizon every grid cell is equidistributed and the pullback is the mean.
    let mixing_horizon = equidistribution_horizon(map, spec.n);
    let opts = PullbackOptions {
        mixing_horizon,
        ..PullbackOptions::default()
    };
    let fields = pullback_series(&set.field, map, &steps, opts)?;

    let vd = match dim {
        2 => std::f64::consts::PI,
        _ => 4.0 / 3.0 * std::f64::consts::PI,
    };
    let mut rows = Vec::with_capacity(balls.len());
    for (j, (&(n_j, lambda), g)) in balls.iter().zip(&fields).enumerate() {
        let radius = lambda.powf(1.0 / dim as f64);
        rows.push(NoRateRow {
            j: j + 1,
            n_j,
            lambda,
            radius,
            ball_average: ball_average_at(g, &center, radius),
            geometric_scale: geometric_scale(g, GEOMETRIC_KAPPA)?,
            mix_norm: mix_norm(g),
            mix_norm_floor: vd.sqrt() * (0.5 * radius).powf(0.5 * (dim as f64 + 1.0)),
        });
    }
    let late_mix_norm = mix_norm(&fields[fields.len() - 1]);
    let last = rows.last().map_or(f64::INFINITY, |r| r.mix_norm);
    let pass = rows.iter().all(|r| {
        r.ball_average >= BALL_AVERAGE_MIN
            && r.geometric_scale > r.lambda
            && r.mix_norm >= r.mix_norm_floor
    }) && late_mix_norm < last;
    Ok(NoRateReport {
        map: map.label.clone(),
        dim,
        n: spec.n,
        center,
        feasibility: set.feasibility,
        designated_cells: set.designated,
        padding_cells: set.padding,
        rows,
        late_step,
        late_mix_norm,
        mixing_horizon,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_tail_sum_is_the_geometric_series() {
        let spec = BadSetSpec::new(
            RateSequence::Exponential { decay: 1.0 },
            Subsequence::Offset(2),
            3,
            2,
            8,
        );
        let f = feasibility(&spec).unwrap();
        let oracle: f64 = (3..200).map(|n| (-(n as f64)).exp()).sum::<f64>() * std::f64::consts::PI;
        assert!(f.bound >= oracle && f.bound - oracle < 1e-12);
        assert!(f.feasible);
    }

    #[test]
    fn pow2_sums_are_exact() {
        let spec = BadSetSpec::new(
            RateSequence::Pow2,
            Subsequence::List(vec![3, 4, 9]),
            3,
            2,
            8,
        );
        let f = feasibility(&spec).unwrap();
        assert!(f.exact);
        assert_eq!(f.sum, 0.125 + 0.0625 + 1.0 / 512.0);
    }

    #[test]
    fn fast_map_agrees_with_the_exact_map() {
        use crate::dyadic::{baker_t, build_t_d, build_t_prime};
        for map in [baker_t(), build_t_prime(), build_t_d(3)] {
            let fast = FastMap::new(&map);
            for &q in &[
                [205, 1433, 675],
                [615, 411, 1843],
                [1639, 1127, 307],
                [1249, 1905, 963],
            ] {
                let p: Vec<f64> = q[..map.dim].iter().map(|&v| v as f64 / 2048.0).collect();
                let p = &p[..];
                let mut x = [p[0], p[1], p.get(2).copied().unwrap_or(0.0)];
                for step in 1..=5 {
                    assert!(fast.apply(&mut x));
                    let exact = crate::flow::apply_map_f64(&map, p, step).unwrap();
                    assert_eq!(&x[..map.dim], &exact[..], "{} step {step}", map.label);
                }
            }
        }
    }
}
