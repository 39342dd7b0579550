//! Exact pullback `f ∘ M^{-s}` of piecewise-constant data under piecewise dyadic-affine maps.
//!
//! The field is carried on an anisotropic dyadic grid. While every cell lies inside one
//! branch and all branches share the same scaling pattern, one step of `M` only permutes
//! cell values onto a new grid (for `T`: twice as fine vertically, half as fine
//! horizontally). The remaining steps are resolved per output cell by mapping the cell
//! backward exactly and integrating over the preimage boxes with a summed-area table.

use rayon::prelude::*;

use super::{compensated_sum, FieldError, ScalarGrid};
use crate::dyadic::{DyadicBox, DyadicInterval, PiecewiseDyadicAffineMap, DEFAULT_DEPTH_CAP};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PullbackOptions {
    /// Exponent cap for preimage boxes.
    pub depth_cap: u32,
    /// A step count from which `M^s` is known to equidistribute every grid cell, so the
    /// pullback equals the mean exactly. For `T` on a `2^n` grid this is `2n`.
    pub mixing_horizon: Option<usize>,
}

impl Default for PullbackOptions {
    fn default() -> Self {
        Self {
            depth_cap: DEFAULT_DEPTH_CAP,
            mixing_horizon: None,
        }
    }
}

/// A piecewise-constant function on the product grid with `2^{scales[a]}` cells along axis `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicGridFunction<F> {
    pub scales: Vec<u32>,
    pub values: Vec<F>,
}

struct SummedArea<F> {
    dims: Vec<usize>,
    prefix: Vec<F>,
}

impl<F: Real> SummedArea<F> {
    fn new(g: &DyadicGridFunction<F>) -> Self {
        let dims: Vec<usize> = g.scales.iter().map(|&k| (1usize << k) + 1).collect();
        let total: usize = dims.iter().product();
        let mut prefix = vec![F::zero(); total];
        let src_dims: Vec<usize> = g.scales.iter().map(|&k| 1usize << k).collect();
        let mut idx = vec![0usize; dims.len()];
        for (flat, v) in g.values.iter().enumerate() {
            let mut r = flat;
            for (a, slot) in idx.iter_mut().enumerate() {
                *slot = r % src_dims[a];
                r /= src_dims[a];
            }
            let mut p = 0usize;
            for a in (0..dims.len()).rev() {
                p = p * dims[a] + idx[a] + 1;
            }
            prefix[p] = *v;
        }
        let mut stride = 1usize;
        for &d in &dims {
            for flat in 0..total {
                if (flat / stride) % d != 0 {
                    let prev = prefix[flat - stride];
                    prefix[flat] += prev;
                }
            }
            stride *= d;
        }
        Self { dims, prefix }
    }

    /// Sum of values over the half-open index ranges.
    fn sum(&self, ranges: &[(usize, usize)]) -> F {
        let d = ranges.len();
        let mut acc = F::zero();
        for corner in 0..(1usize << d) {
            let mut p = 0usize;
            let mut negative = false;
            for a in (0..d).rev() {
                let take_hi = corner >> a & 1 == 1;
                let i = if take_hi { ranges[a].1 } else { ranges[a].0 };
                if !take_hi {
                    negative = !negative;
                }
                p = p * self.dims[a] + i;
            }
            if negative {
                acc -= self.prefix[p];
            } else {
                acc += self.prefix[p];
            }
        }
        acc
    }
}

impl<F: Real> DyadicGridFunction<F> {
    pub fn from_grid(g: &ScalarGrid<F>) -> Self {
        Self {
            scales: vec![g.n(); g.dim()],
            values: g.values().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.scales.len()
    }

    fn side(&self, a: usize) -> usize {
        1usize << self.scales[a]
    }

    fn flat(&self, idx: &[usize]) -> usize {
        (0..self.dim())
            .rev()
            .fold(0, |acc, a| acc * self.side(a) + idx[a])
    }

    /// `g ∘ M^{-1}`, provided `M` maps every cell onto a single cell of a common finer grid.
    pub fn push_forward(&self, map: &PiecewiseDyadicAffineMap) -> Option<Self> {
        let d = self.dim();
        let first = &map.branches.first()?.affine;
        if map
            .branches
            .iter()
            .any(|b| b.affine.perm != first.perm || b.affine.exp != first.exp)
        {
            return None;
        }
        let mut new_scales = Vec::with_capacity(d);
        for i in 0..d {
            let k = self.scales[first.perm[i]] as i64 - first.exp[i] as i64;
            if k < 0 {
                return None;
            }
            new_scales.push(k as u32);
        }
        for b in &map.branches {
            if b.domain
                .axes
                .iter()
                .zip(&self.scales)
                .any(|(iv, &k)| iv.k > k)
            {
                return None;
            }
        }
        // Output index along axis i is `off_i ± j_{perm_i}`.
        let mut plans = Vec::with_capacity(map.branches.len());
        for b in &map.branches {
            let mut offsets = Vec::with_capacity(d);
            for i in 0..d {
                let t = b.affine.trans[i].mul_pow2(new_scales[i] as i32);
                if !t.is_integer() {
                    return None;
                }
                let t = t.numerator();
                offsets.push(if b.affine.sign[i] > 0 { t } else { t - 1 });
            }
            let ranges: Vec<(usize, usize)> = b
                .domain
                .axes
                .iter()
                .zip(&self.scales)
                .map(|(iv, &k)| {
                    let s = k - iv.k;
                    ((iv.j << s) as usize, ((iv.j + 1) << s) as usize)
                })
                .collect();
            plans.push((offsets, ranges));
        }
        let new_sides: Vec<usize> = new_scales.iter().map(|&k| 1usize << k).collect();
        let mut out = vec![F::nan(); self.values.len()];
        let mut idx = vec![0usize; d];
        for ((offsets, ranges), b) in plans.iter().zip(&map.branches) {
            let count: usize = ranges.iter().map(|r| r.1 - r.0).product();
            for c in 0..count {
                let mut r = c;
                for (a, slot) in idx.iter_mut().enumerate() {
                    let len = ranges[a].1 - ranges[a].0;
                    *slot = ranges[a].0 + r % len;
                    r /= len;
                }
                let mut flat = 0usize;
                for i in (0..d).rev() {
                    let j = idx[first.perm[i]] as i128;
                    let o = if b.affine.sign[i] > 0 {
                        offsets[i] + j
                    } else {
                        offsets[i] - j
                    };
                    if o < 0 || o as usize >= new_sides[i] {
                        return None;
                    }
                    flat = flat * new_sides[i] + o as usize;
                }
                out[flat] = self.values[self.flat(&idx)];
            }
        }
        if out.iter().any(|v| v.is_nan()) {
            return None;
        }
        Some(Self {
            scales: new_scales,
            values: out,
        })
    }

    /// Index ranges of cells met by `b`, and whether `b` sits inside a single cell.
    fn cover(&self, b: &DyadicBox) -> (Vec<(usize, usize)>, bool) {
        let mut single = true;
        let ranges = b
            .axes
            .iter()
            .zip(&self.scales)
            .map(|(iv, &k)| {
                if iv.k >= k {
                    let i = (iv.j >> (iv.k - k)) as usize;
                    (i, i + 1)
                } else {
                    single = false;
                    let s = k - iv.k;
                    ((iv.j << s) as usize, ((iv.j + 1) << s) as usize)
                }
            })
            .collect();
        (ranges, single)
    }

    fn mean_over(&self, b: &DyadicBox, sat: &mut Option<SummedArea<F>>) -> F {
        let (ranges, single) = self.cover(b);
        if single {
            let idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
            return self.values[self.flat(&idx)];
        }
        let sat = sat.get_or_insert_with(|| SummedArea::new(self));
        let count: usize = ranges.iter().map(|r| r.1 - r.0).product();
        sat.sum(&ranges) / F::lit(count as f64)
    }
}

/// `f ∘ M^{-steps}` as exact cell averages on the grid of `grid`.
pub fn pullback_exact<F: Real>(
    grid: &ScalarGrid<F>,
    map: &PiecewiseDyadicAffineMap,
    steps: usize,
) -> Result<ScalarGrid<F>, FieldError> {
    Ok(pullback_series(grid, map, &[steps], PullbackOptions::default())?.remove(0))
}

/// `f ∘ M^{-s}` for every `s` in `steps` (any order), sharing work between steps.
pub fn pullback_series<F: Real>(
    grid: &ScalarGrid<F>,
    map: &PiecewiseDyadicAffineMap,
    steps: &[usize],
    opts: PullbackOptions,
) -> Result<Vec<ScalarGrid<F>>, FieldError> {
    if map.dim != grid.dim() {
        return Err(FieldError::Parameter(format!(
            "map of dimension {} on a {}-d grid",
            map.dim,
            grid.dim()
        )));
    }
    let mut order: Vec<usize> = (0..steps.len()).collect();
    order.sort_by_key(|&i| steps[i]);
    let inverse = map.inverse();
    let mut state = DyadicGridFunction::from_grid(grid);
    let mut done = 0usize;
    let mut stuck = false;
    let mut out: Vec<Option<ScalarGrid<F>>> = vec![None; steps.len()];
    let n = grid.n();
    let cells: Vec<DyadicBox> = (0..grid.len())
        .map(|flat| {
            DyadicBox::new(
                grid.multi_index(flat)
                    .into_iter()
                    .map(|i| DyadicInterval::new(n, i as i128))
                    .collect(),
            )
        })
        .collect();

    for &slot in &order {
        let s = steps[slot];
        if opts.mixing_horizon.is_some_and(|h| s >= h) {
            let m = grid.mean();
            out[slot] = Some(grid.with_values(vec![m; grid.len()]));
            continue;
        }
        while !stuck && done < s {
            match state.push_forward(map) {
                Some(next) => {
                    state = next;
                    done += 1;
                }
                None => stuck = true,
            }
        }
        let rest = s - done;
        let g = &state;
        let values: Result<Vec<F>, FieldError> = cells
            .par_iter()
            .map_init(
                || None,
                |sat, cell| {
                    if rest == 0 {
                        return Ok(g.mean_over(cell, sat));
                    }
                    let pieces = inverse.iterate_box_raw(cell, rest, opts.depth_cap)?;
                    let cell_measure = cell.measure().to_f64();
                    let parts = pieces
                        .iter()
                        .map(|p| g.mean_over(p, sat) * F::lit(p.measure().to_f64() / cell_measure));
                    Ok(compensated_sum(parts))
                },
            )
            .collect();
        out[slot] = Some(grid.with_values(values?));
    }
    Ok(out
        .into_iter()
        .map(|g| g.expect("every step filled"))
        .collect())
}
