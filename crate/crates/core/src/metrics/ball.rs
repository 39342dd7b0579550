//! Ball averages with exact cell-overlap weights, and the two mixing scales built on them.

use std::collections::HashMap;

use rayon::prelude::*;

use super::MetricsError;
use crate::field::{Domain, ScalarGrid};
use crate::{quad, Real};

fn asin_antiderivative(x: f64, r: f64) -> f64 {
    let s = (r * r - x * x).max(0.0).sqrt();
    0.5 * (x * s + r * r * (x / r).clamp(-1.0, 1.0).asin())
}

/// Area of `{X ≤ x, Y ≤ y} ∩ B_r(0)`.
fn disc_quadrant(x: f64, y: f64, r: f64) -> f64 {
    let xc = x.clamp(-r, r);
    if xc <= -r || y <= -r {
        return 0.0;
    }
    let f = |u: f64| asin_antiderivative(u, r);
    // ∫ 2s(X) dX and ∫ (y + s(X)) dX over [u, v] ∩ [-r, xc].
    let full = |u: f64, v: f64| {
        let (u, v) = (u.max(-r), v.min(xc));
        if v > u {
            2.0 * (f(v) - f(u))
        } else {
            0.0
        }
    };
    if y >= r {
        return full(-r, r);
    }
    let a = (r * r - y * y).sqrt();
    let middle = {
        let (u, v) = ((-a).max(-r), a.min(xc));
        if v > u {
            y * (v - u) + (f(v) - f(u))
        } else {
            0.0
        }
    };
    let sides = if y >= 0.0 {
        full(-r, -a) + full(a, r)
    } else {
        0.0
    };
    middle + sides
}

/// Exact area of `[x0, x1] × [y0, y1] ∩ B_r(0)`.
pub(crate) fn disc_rect_area(x0: f64, x1: f64, y0: f64, y1: f64, r: f64) -> f64 {
    let a = disc_quadrant(x1, y1, r) - disc_quadrant(x0, y1, r) - disc_quadrant(x1, y0, r)
        + disc_quadrant(x0, y0, r);
    a.max(0.0)
}

/// Volume of a box ∩ `B_r(0)` in 3-d: Gauss–Legendre in `z` over the disc-slice areas,
/// split at every height where the slice radius crosses a rectangle edge or corner.
fn ball_box_volume(lo: [f64; 3], hi: [f64; 3], r: f64) -> f64 {
    let z0 = lo[2].max(-r);
    let z1 = hi[2].min(r);
    if z1 <= z0 {
        return 0.0;
    }
    let mut cuts = vec![z0, z1];
    let mut dists = vec![lo[0].abs(), hi[0].abs(), lo[1].abs(), hi[1].abs()];
    for &x in &[lo[0], hi[0]] {
        for &y in &[lo[1], hi[1]] {
            dists.push((x * x + y * y).sqrt());
        }
    }
    for d in dists {
        if d < r {
            let z = (r * r - d * d).sqrt();
            for c in [z, -z] {
                if c > z0 && c < z1 {
                    cuts.push(c);
                }
            }
        }
    }
    cuts.push(0.0f64.clamp(z0, z1));
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut vol = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        vol += quad::integrate(quad::gl8(), a, b, |z| {
            let rz = (r * r - z * z).max(0.0).sqrt();
            disc_rect_area(lo[0], hi[0], lo[1], hi[1], rz)
        });
    }
    vol
}

/// One line of the stencil along axis 0: a contiguous run of fully covered cells and the
/// partially covered cells around it.
#[derive(Clone, Debug)]
struct StencilRow {
    offset: Vec<i64>,
    run: Option<(i64, i64)>,
    run_weight: f64,
    partial: Vec<(i64, f64)>,
}

#[derive(Clone, Debug)]
pub(crate) struct BallStencil {
    rows: Vec<StencilRow>,
}

impl BallStencil {
    /// Weights `|cell ∩ B_r(centre)| / |B_r|` for cells of width `h`, offsets in cells.
    pub(crate) fn new(dim: usize, r_cells: f64) -> Self {
        let reach = (r_cells + 0.5).ceil() as i64;
        let ball = match dim {
            2 => std::f64::consts::PI * r_cells * r_cells,
            _ => 4.0 / 3.0 * std::f64::consts::PI * r_cells.powi(3),
        };
        let overlap = |off: &[i64]| -> f64 {
            let lo: Vec<f64> = off.iter().map(|&o| o as f64 - 0.5).collect();
            let hi: Vec<f64> = off.iter().map(|&o| o as f64 + 0.5).collect();
            let far2: f64 = lo
                .iter()
                .zip(&hi)
                .map(|(a, b)| a.abs().max(b.abs()).powi(2))
                .sum();
            if far2 <= r_cells * r_cells {
                return 1.0;
            }
            let near2: f64 = lo
                .iter()
                .zip(&hi)
                .map(|(a, b)| {
                    if *a <= 0.0 && *b >= 0.0 {
                        0.0
                    } else {
                        a.abs().min(b.abs()).powi(2)
                    }
                })
                .sum();
            if near2 >= r_cells * r_cells {
                return 0.0;
            }
            match dim {
                2 => disc_rect_area(lo[0], hi[0], lo[1], hi[1], r_cells),
                _ => ball_box_volume([lo[0], lo[1], lo[2]], [hi[0], hi[1], hi[2]], r_cells),
            }
        };
        let mut rows = Vec::new();
        let row_dims = dim - 1;
        let span = (2 * reach + 1) as usize;
        for flat in 0..span.pow(row_dims as u32) {
            let mut r = flat;
            let offset: Vec<i64> = (0..row_dims)
                .map(|_| {
                    let o = (r % span) as i64 - reach;
                    r /= span;
                    o
                })
                .collect();
            let mut cells = Vec::new();
            for p in -reach..=reach {
                let mut off = vec![p];
                off.extend(&offset);
                let w = overlap(&off);
                if w > 0.0 {
                    cells.push((p, w));
                }
            }
            if cells.is_empty() {
                continue;
            }
            let full: Vec<i64> = cells.iter().filter(|c| c.1 == 1.0).map(|c| c.0).collect();
            let run = (!full.is_empty()).then(|| (*full.first().unwrap(), *full.last().unwrap()));
            let partial = cells
                .into_iter()
                .filter(|&(p, _)| run.map_or(true, |(a, b)| p < a || p > b))
                .map(|(p, w)| (p, w / ball))
                .collect();
            rows.push(StencilRow {
                offset,
                run,
                run_weight: 1.0 / ball,
                partial,
            });
        }
        Self { rows }
    }
}

/// Ball averages on the grid's own resolution, with a prepared stencil.
///
/// Every grid line along axis 0 is copied with a halo (zeros on the box, wrapped values on
/// the torus) and prefix-summed; each stencil row then contributes one prefix difference
/// for its full run and one shifted axpy per partial cell.
fn apply_stencil<F: Real>(grid: &ScalarGrid<F>, stencil: &BallStencil) -> Vec<F> {
    let side = grid.side();
    let dim = grid.dim();
    let torus = grid.domain() == Domain::Torus;
    let halo = stencil
        .rows
        .iter()
        .flat_map(|r| {
            r.run
                .into_iter()
                .flat_map(|(a, b)| [a, b])
                .chain(r.partial.iter().map(|p| p.0))
        })
        .map(|p| p.unsigned_abs() as usize)
        .max()
        .unwrap_or(0)
        + 1;
    let ps = side + 2 * halo;
    let lines = grid.len() / side;
    let values = grid.values();
    let mut padded = vec![F::zero(); lines * ps];
    let mut prefix = vec![F::zero(); lines * (ps + 1)];
    padded
        .par_chunks_mut(ps)
        .zip(prefix.par_chunks_mut(ps + 1))
        .enumerate()
        .for_each(|(l, (pad, pre))| {
            let src = &values[l * side..(l + 1) * side];
            for (i, slot) in pad.iter_mut().enumerate() {
                let x = i as i64 - halo as i64;
                if (0..side as i64).contains(&x) {
                    *slot = src[x as usize];
                } else if torus {
                    *slot = src[x.rem_euclid(side as i64) as usize];
                }
            }
            for i in 0..ps {
                pre[i + 1] = pre[i] + pad[i];
            }
        });
    let rows: Vec<(&[i64], Option<(usize, usize)>, F, Vec<(usize, F)>)> = stencil
        .rows
        .iter()
        .map(|r| {
            (
                r.offset.as_slice(),
                r.run
                    .map(|(a, b)| ((a + halo as i64) as usize, (b + halo as i64 + 1) as usize)),
                F::lit(r.run_weight),
                r.partial
                    .iter()
                    .map(|&(p, w)| ((p + halo as i64) as usize, F::lit(w)))
                    .collect(),
            )
        })
        .collect();
    let mut out = vec![F::zero(); grid.len()];
    out.par_chunks_mut(side)
        .enumerate()
        .for_each(|(line, acc)| {
            let mut coords = [0i64; 2];
            let mut r = line;
            for c in coords.iter_mut().take(dim - 1) {
                *c = (r % side) as i64;
                r /= side;
            }
            'rows: for (off, run, rw, partial) in &rows {
                let mut l = 0usize;
                for a in (0..dim - 1).rev() {
                    let mut c = coords[a] + off[a];
                    if torus {
                        c = c.rem_euclid(side as i64);
                    } else if c < 0 || c >= side as i64 {
                        continue 'rows;
                    }
                    l = l * side + c as usize;
                }
                let pad = &padded[l * ps..(l + 1) * ps];
                let pre = &prefix[l * (ps + 1)..(l + 1) * (ps + 1)];
                if let Some((a, b)) = *run {
                    let hi = &pre[b..b + side];
                    let lo = &pre[a..a + side];
                    for ((o, h), q) in acc.iter_mut().zip(hi).zip(lo) {
                        *o += *rw * (*h - *q);
                    }
                }
                for &(p, w) in partial {
                    for (o, v) in acc.iter_mut().zip(&pad[p..p + side]) {
                        *o += w * *v;
                    }
                }
            }
        });
    out
}

/// `|B_r(y)|^{-1} ∫_{B_r(y)} f` at every cell centre `y`; zero extension on the box,
/// periodic on the torus.
pub fn ball_average_field<F: Real>(
    grid: &ScalarGrid<F>,
    r: F,
) -> Result<ScalarGrid<F>, MetricsError> {
    let r = r.to_f64().unwrap_or(f64::NAN);
    if !(r > 0.0 && r < 1.0) {
        return Err(MetricsError::RadiusOutOfRange(r));
    }
    Ok(ball_average_unchecked(grid, r))
}

pub(crate) fn ball_average_unchecked<F: Real>(grid: &ScalarGrid<F>, r: f64) -> ScalarGrid<F> {
    let stencil = BallStencil::new(grid.dim(), r * grid.side() as f64);
    grid.with_values(apply_stencil(grid, &stencil))
}

/// Ball average at a single point, by the same exact weights.
pub fn ball_average_at<F: Real>(grid: &ScalarGrid<F>, center: &[f64], r: f64) -> F {
    let side = grid.side() as i64;
    let h = 1.0 / side as f64;
    let ball = match grid.dim() {
        2 => std::f64::consts::PI * r * r,
        _ => 4.0 / 3.0 * std::f64::consts::PI * r.powi(3),
    };
    let lo: Vec<i64> = center
        .iter()
        .map(|c| ((c - r) / h).floor() as i64)
        .collect();
    let hi: Vec<i64> = center
        .iter()
        .map(|c| ((c + r) / h).floor() as i64)
        .collect();
    let counts: Vec<usize> = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| (b - a + 1) as usize)
        .collect();
    let total: usize = counts.iter().product();
    let mut acc = F::zero();
    for flat in 0..total {
        let mut rr = flat;
        let mut idx = Vec::with_capacity(grid.dim());
        let mut cl = Vec::with_capacity(grid.dim());
        let mut ch = Vec::with_capacity(grid.dim());
        for a in 0..grid.dim() {
            let i = lo[a] + (rr % counts[a]) as i64;
            rr /= counts[a];
            cl.push(i as f64 * h - center[a]);
            ch.push((i + 1) as f64 * h - center[a]);
            idx.push(i);
        }
        let w = match grid.dim() {
            2 => disc_rect_area(cl[0], ch[0], cl[1], ch[1], r),
            _ => ball_box_volume([cl[0], cl[1], cl[2]], [ch[0], ch[1], ch[2]], r),
        };
        if w == 0.0 {
            continue;
        }
        let mut ok = true;
        let cells: Vec<usize> = idx
            .iter()
            .map(|&i| match grid.domain() {
                Domain::Torus => i.rem_euclid(side) as usize,
                Domain::Box => {
                    if i < 0 || i >= side {
                        ok = false;
                    }
                    i.clamp(0, side - 1) as usize
                }
            })
            .collect();
        if ok {
            acc += F::lit(w / ball) * grid.get(&cells);
        }
    }
    acc
}

/// Radius ladder for the mix-norm: `(radius, weight)` midpoints.
pub fn mix_norm_ladder(n: u32, geometric: usize, linear: usize) -> Vec<(f64, f64)> {
    let r0 = (-(n as f64)).exp2();
    let mut out = vec![(0.5 * r0, r0)];
    let ratio = (0.5 / r0).powf(1.0 / geometric as f64);
    let mut a = r0;
    for _ in 0..geometric {
        let b = a * ratio;
        out.push(((a * b).sqrt(), b - a));
        a = b;
    }
    let step = 0.5 / linear as f64;
    for i in 0..linear {
        let a = 0.5 + i as f64 * step;
        out.push((a + 0.5 * step, step));
    }
    out
}

/// Level-of-detail policy: a radius is evaluated on the block-averaged grid where it spans
/// at least `cells` cells, or on the full grid when it is smaller than that.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lod {
    pub cells: f64,
}

impl Lod {
    pub const MIX_NORM: Lod = Lod { cells: 16.0 };
    pub const GEOMETRIC: Lod = Lod { cells: 32.0 };
    pub const EXACT: Lod = Lod {
        cells: f64::INFINITY,
    };

    fn level(self, n: u32, r: f64) -> u32 {
        if !self.cells.is_finite() {
            return n;
        }
        let l = (self.cells / r).log2().ceil();
        if l >= n as f64 {
            n
        } else {
            l.max(0.0) as u32
        }
    }
}

struct Pyramid<'a, F> {
    base: &'a ScalarGrid<F>,
    levels: HashMap<u32, ScalarGrid<F>>,
}

impl<'a, F: Real> Pyramid<'a, F> {
    fn new(base: &'a ScalarGrid<F>) -> Self {
        Self {
            base,
            levels: HashMap::new(),
        }
    }

    fn at(&mut self, level: u32) -> &ScalarGrid<F> {
        if level >= self.base.n() {
            return self.base;
        }
        let base = self.base;
        self.levels
            .entry(level)
            .or_insert_with(|| base.block_average(base.n() - level))
    }
}

/// `Φ(f) = [∫_0^1 ∫_{Q} (⨍_{B_r(y)} f)^2 dy dr]^{1/2}` by the midpoint rule on the default ladder.
pub fn mix_norm<F: Real>(grid: &ScalarGrid<F>) -> F {
    mix_norm_with(grid, &mix_norm_ladder(grid.n(), 48, 8), Lod::MIX_NORM)
}

pub fn mix_norm_with<F: Real>(grid: &ScalarGrid<F>, ladder: &[(f64, f64)], lod: Lod) -> F {
    let mut pyr = Pyramid::new(grid);
    let mut total = 0.0f64;
    for &(r, w) in ladder {
        let level = lod.level(grid.n(), r);
        let g = pyr.at(level);
        let avg = ball_average_unchecked(g, r);
        let cell = (-((g.dim() as u32 * g.n()) as f64)).exp2();
        let sq: f64 = avg
            .values()
            .iter()
            .map(|v| v.to_f64().unwrap().powi(2))
            .sum();
        total += w * sq * cell;
    }
    F::lit(total.sqrt())
}

/// Smallest `ε = i 2^{-n}` with `sup_y |⨍_{B_ε(y)} f| ≤ κ ‖f‖_∞`, found by bisection on `i`;
/// 1 if no `ε ≤ 1` qualifies.
pub fn geometric_scale<F: Real>(grid: &ScalarGrid<F>, kappa: F) -> Result<F, MetricsError> {
    geometric_scale_with(grid, kappa, Lod::GEOMETRIC)
}

pub fn geometric_scale_with<F: Real>(
    grid: &ScalarGrid<F>,
    kappa: F,
    lod: Lod,
) -> Result<F, MetricsError> {
    let sup = grid.sup_norm();
    if sup == F::zero() {
        return Err(MetricsError::ZeroField);
    }
    let threshold = kappa * sup;
    let side = grid.side();
    let mut pyr = Pyramid::new(grid);
    let mut mixed_at = |i: usize| -> bool {
        let r = i as f64 / side as f64;
        let g = pyr.at(lod.level(grid.n(), r));
        let avg = ball_average_unchecked(g, r);
        avg.sup_norm() <= threshold
    };
    if !mixed_at(side) {
        return Ok(F::one());
    }
    let (mut lo, mut hi) = (0usize, side);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if mixed_at(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(F::lit(hi as f64 / side as f64))
}
