//! The fractional operator `Λ^γ f(x) = ∫_Q (f(x) - f(y)) / |x - y|^{2+γ} dy` on a rectangle.

use serde::{Deserialize, Serialize};

use super::RegularityError;
use crate::quad;

/// Axis-aligned integration domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Rect {
    pub const UNIT: Rect = Rect {
        lo: [0.0, 0.0],
        hi: [1.0, 1.0],
    };
    /// `(-1, 1)²`.
    pub const SYMMETRIC: Rect = Rect {
        lo: [-1.0, -1.0],
        hi: [1.0, 1.0],
    };

    pub fn boundary_distance(&self, x: [f64; 2]) -> f64 {
        (0..2)
            .map(|a| (x[a] - self.lo[a]).min(self.hi[a] - x[a]))
            .fold(f64::INFINITY, f64::min)
    }

    fn corners(&self) -> [[f64; 2]; 4] {
        [
            [self.lo[0], self.lo[1]],
            [self.hi[0], self.lo[1]],
            [self.hi[0], self.hi[1]],
            [self.lo[0], self.hi[1]],
        ]
    }

    /// Distance from interior `x` to the boundary along the unit direction `e`.
    fn exit(&self, x: [f64; 2], e: [f64; 2]) -> f64 {
        let mut r = f64::INFINITY;
        for a in 0..2 {
            if e[a] > 0.0 {
                r = r.min((self.hi[a] - x[a]) / e[a]);
            } else if e[a] < 0.0 {
                r = r.min((self.lo[a] - x[a]) / e[a]);
            }
        }
        r
    }
}

/// Node counts for the two parts of the split at `ρ₀ = ½ dist(x, ∂Q)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    /// Inner annuli `[ρ₀ 2^{-k-1}, ρ₀ 2^{-k}]`; the disc inside the last one is dropped.
    pub annuli: usize,
    /// Gauss nodes in `ρ` per annulus.
    pub annulus_nodes: usize,
    /// Midpoint nodes in `θ ∈ [0, π)` for the symmetric pairs `x ± ρe`.
    pub angles: usize,
    /// Gauss nodes in `θ` per outer sector (sectors split at the corner directions).
    pub sector_nodes: usize,
    /// Gauss nodes per outer radial panel.
    pub panel_nodes: usize,
    /// Geometric growth of the outer radial panels.
    pub panel_ratio: f64,
    /// Recompute with [`QuadSpec::refined`] and fail on disagreement.
    pub check: bool,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            annuli: 12,
            annulus_nodes: 4,
            angles: 32,
            sector_nodes: 16,
            panel_nodes: 8,
            panel_ratio: 2.0,
            check: true,
            rel_tol: 0.05,
            abs_tol: 1e-10,
        }
    }
}

impl QuadSpec {
    pub fn unchecked(self) -> Self {
        Self {
            check: false,
            ..self
        }
    }

    pub fn refined(&self) -> Self {
        Self {
            annuli: self.annuli + 4,
            annulus_nodes: self.annulus_nodes + 2,
            angles: 2 * self.angles,
            sector_nodes: (2 * self.sector_nodes).min(64),
            panel_nodes: (self.panel_nodes + 4).min(64),
            panel_ratio: self.panel_ratio.sqrt(),
            check: false,
            ..*self
        }
    }
}

fn norm<const M: usize>(v: &[f64; M]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `Λ^γ` applied componentwise to a vector-valued `f` at interior `x`.
pub fn lambda_gamma<const M: usize>(
    f: &(impl Fn([f64; 2]) -> [f64; M] + ?Sized),
    gamma: f64,
    x: [f64; 2],
    region: &Rect,
    spec: &QuadSpec,
) -> Result<[f64; M], RegularityError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(RegularityError::GammaOutOfRange(gamma));
    }
    let d = region.boundary_distance(x);
    if !(d > 0.0) {
        return Err(RegularityError::NotInterior(x.to_vec()));
    }
    let coarse = evaluate(f, gamma, x, region, spec, d);
    if spec.check {
        let fine = evaluate(f, gamma, x, region, &spec.refined(), d);
        let mut diff = [0.0; M];
        for i in 0..M {
            diff[i] = coarse[i] - fine[i];
        }
        if norm(&diff) > spec.rel_tol * norm(&coarse).max(norm(&fine)) + spec.abs_tol {
            return Err(RegularityError::QuadratureUnstable {
                x: x.to_vec(),
                coarse: norm(&coarse),
                refined: norm(&fine),
            });
        }
    }
    Ok(coarse)
}

pub fn lambda_gamma_scalar(
    f: &(impl Fn([f64; 2]) -> f64 + ?Sized),
    gamma: f64,
    x: [f64; 2],
    region: &Rect,
    spec: &QuadSpec,
) -> Result<f64, RegularityError> {
    lambda_gamma(&|y| [f(y)], gamma, x, region, spec).map(|v| v[0])
}

fn evaluate<const M: usize>(
    f: &(impl Fn([f64; 2]) -> [f64; M] + ?Sized),
    gamma: f64,
    x: [f64; 2],
    region: &Rect,
    spec: &QuadSpec,
    d: f64,
) -> [f64; M] {
    let fx = f(x);
    let rho0 = 0.5 * d;
    let mut acc = [0.0; M];
    let at = |rho: f64, e: [f64; 2]| [x[0] + rho * e[0], x[1] + rho * e[1]];

    // Inner disc: second differences over symmetric pairs, integrand O(ρ^{1-γ}).
    let dtheta = std::f64::consts::PI / spec.angles as f64;
    let dirs: Vec<[f64; 2]> = (0..spec.angles)
        .map(|m| {
            let th = (m as f64 + 0.5) * dtheta;
            [th.cos(), th.sin()]
        })
        .collect();
    let rule = quad::gl(spec.annulus_nodes);
    let mut outer = rho0;
    for _ in 0..spec.annuli {
        let inner = 0.5 * outer;
        let (mid, half) = (0.5 * (outer + inner), 0.5 * (outer - inner));
        for &(node, w) in rule {
            let rho = mid + half * node;
            let weight = w * half * dtheta * rho.powf(-1.0 - gamma);
            for e in &dirs {
                let (a, b) = (f(at(rho, *e)), f(at(-rho, *e)));
                for i in 0..M {
                    acc[i] += weight * (2.0 * fx[i] - a[i] - b[i]);
                }
            }
        }
        outer = inner;
    }

    // Outer region: polar about x, sectors split where the exit side changes.
    let mut cuts: Vec<f64> = region
        .corners()
        .iter()
        .map(|c| (c[1] - x[1]).atan2(c[0] - x[0]))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.push(cuts[0] + std::f64::consts::TAU);
    let trule = quad::gl(spec.sector_nodes);
    let prule = quad::gl(spec.panel_nodes);
    for s in cuts.windows(2) {
        let (tmid, thalf) = (0.5 * (s[0] + s[1]), 0.5 * (s[1] - s[0]));
        for &(tn, tw) in trule {
            let th = tmid + thalf * tn;
            let e = [th.cos(), th.sin()];
            let r_exit = region.exit(x, e);
            let mut ray = [0.0; M];
            let mut a = rho0;
            loop {
                let b = a * spec.panel_ratio;
                if b >= r_exit {
                    // ρ = R - (R - a)u² absorbs an edge singularity of f.
                    let len = r_exit - a;
                    for &(un, uw) in prule {
                        let u = 0.5 * (un + 1.0);
                        let rho = r_exit - len * u * u;
                        let jac = 0.5 * uw * 2.0 * len * u;
                        let fy = f(at(rho, e));
                        let k = jac * rho.powf(-1.0 - gamma);
                        for i in 0..M {
                            ray[i] += k * (fx[i] - fy[i]);
                        }
                    }
                    break;
                }
                let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                for &(pn, pw) in prule {
                    let rho = mid + half * pn;
                    let fy = f(at(rho, e));
                    let k = pw * half * rho.powf(-1.0 - gamma);
                    for i in 0..M {
                        ray[i] += k * (fx[i] - fy[i]);
                    }
                }
                a = b;
            }
            for i in 0..M {
                acc[i] += tw * thalf * ray[i];
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_distance_hits_the_right_side() {
        let r = Rect::UNIT;
        assert!((r.exit([0.25, 0.5], [1.0, 0.0]) - 0.75).abs() < 1e-15);
        let s = 0.5f64.sqrt();
        assert!((r.exit([0.25, 0.5], [-s, s]) - 0.25 / s).abs() < 1e-15);
    }

    #[test]
    fn refined_spec_is_finer() {
        let q = QuadSpec::default();
        let r = q.refined();
        assert!(
            r.annuli > q.annuli && r.angles > q.angles && r.panel_ratio < q.panel_ratio && !r.check
        );
    }
}
