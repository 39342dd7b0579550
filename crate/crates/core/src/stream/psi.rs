//! The stream functions `ψ_α = 2^α sin(πx) sin(πy) / (sin(πx) + sin(πy))^α` and the cellwise
//! variants built from them.

use serde::{Deserialize, Serialize};

use super::StreamError;
use crate::Real;

/// Value, gradient and Hessian at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<F> {
    pub value: F,
    pub grad: [F; 2],
    pub hess: [[F; 2]; 2],
}

impl<F: Real> Jet<F> {
    pub fn zero() -> Self {
        Self {
            value: F::zero(),
            grad: [F::zero(); 2],
            hess: [[F::zero(); 2]; 2],
        }
    }
}

/// `sin(πx)` for `x ∈ [0, 1]`, reflected so that it vanishes exactly at both ends.
pub fn sin_pi<F: Real>(x: F) -> F {
    let half = F::lit(0.5);
    let x = if x > half { F::one() - x } else { x };
    (F::PI() * x).sin()
}

/// Closed-form `ψ_α` with first and second derivatives on the unit square. Corners return zero.
pub fn psi_alpha<F: Real>(alpha: F, x: F, y: F) -> Jet<F> {
    let pi = F::PI();
    let (s, cx) = (sin_pi(x), (pi * x).cos());
    let (t, cy) = (sin_pi(y), (pi * y).cos());
    let (cx, cy) = (pi * cx, pi * cy);
    let sum = s + t;
    if sum <= F::zero() {
        return Jet::zero();
    }
    let k = F::lit(2.0).powf(alpha);
    let one = F::one();
    let two = F::lit(2.0);
    let sa = sum.powf(-alpha);
    let sa1 = sa / sum;
    let sa2 = sa1 / sum;
    let g = s * t * sa;
    let gs = t * sa1 * ((one - alpha) * s + t);
    let gt = s * sa1 * (s + (one - alpha) * t);
    let gss = -alpha * t * sa2 * ((one - alpha) * s + two * t);
    let gtt = -alpha * s * sa2 * ((one - alpha) * t + two * s);
    let q = (one - alpha) * s + t;
    let gst = sa2 * (sum * q - (alpha + one) * t * q + t * sum);
    let pi2 = pi * pi;
    Jet {
        value: k * g,
        grad: [k * gs * cx, k * gt * cy],
        hess: [
            [k * (gss * cx * cx - pi2 * s * gs), k * gst * cx * cy],
            [k * gst * cx * cy, k * (gtt * cy * cy - pi2 * t * gt)],
        ],
    }
}

/// `ψ_α` alone, without derivatives.
pub fn psi_alpha_value<F: Real>(alpha: F, x: F, y: F) -> F {
    let s = sin_pi(x);
    let t = sin_pi(y);
    let sum = s + t;
    if sum <= F::zero() {
        return F::zero();
    }
    F::lit(2.0).powf(alpha) * s * t * sum.powf(-alpha)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamVariant {
    /// The profile on the whole unit square.
    WholeSquare,
    /// `½ sgn(2x-1) f({2x}, y)`: one copy per half, opposite signs.
    HalfSquare,
    /// `½ f(2x-1, 2y-1)` for the doubly-odd extension of the whole-square profile; torus.
    PeriodicPsi,
    /// Same construction applied to the half-square profile; torus.
    PeriodicPhi,
}

/// A rectangle of the unit square carrying `coef · f((x - lo) / size)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Patch {
    pub lo: [f64; 2],
    pub size: [f64; 2],
    pub coef: f64,
}

/// Signs of the doubly-odd extensions on the cells of `G_1`, in the order LL, LR, UL, UR.
const PSI_CELL_SIGNS: [f64; 4] = [1.0, -1.0, -1.0, 1.0];
const PHI_CELL_SIGNS: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];
const CELL_LO: [[f64; 2]; 4] = [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]];

impl StreamVariant {
    pub fn is_periodic(self) -> bool {
        matches!(self, Self::PeriodicPsi | Self::PeriodicPhi)
    }

    /// The patches tiling the unit square, before normalization. `phi_flip` negates every
    /// half-square-based patch.
    pub fn patches(self, phi_flip: bool) -> Vec<Patch> {
        let flip = if phi_flip { -1.0 } else { 1.0 };
        match self {
            Self::WholeSquare => vec![Patch {
                lo: [0.0, 0.0],
                size: [1.0, 1.0],
                coef: 1.0,
            }],
            Self::HalfSquare => vec![
                Patch {
                    lo: [0.0, 0.0],
                    size: [0.5, 1.0],
                    coef: -0.5 * flip,
                },
                Patch {
                    lo: [0.5, 0.0],
                    size: [0.5, 1.0],
                    coef: 0.5 * flip,
                },
            ],
            Self::PeriodicPsi => (0..4)
                .map(|c| Patch {
                    lo: CELL_LO[c],
                    size: [0.5, 0.5],
                    coef: 0.5 * PSI_CELL_SIGNS[c],
                })
                .collect(),
            Self::PeriodicPhi => (0..4)
                .flat_map(|c| {
                    let [x0, y0] = CELL_LO[c];
                    let s = 0.25 * PHI_CELL_SIGNS[c] * flip;
                    [
                        Patch {
                            lo: [x0, y0],
                            size: [0.25, 0.5],
                            coef: -s,
                        },
                        Patch {
                            lo: [x0 + 0.25, y0],
                            size: [0.25, 0.5],
                            coef: s,
                        },
                    ]
                })
                .collect(),
        }
    }

    /// Lines `x = c` across which the profile changes sign and is only Lipschitz.
    pub fn cuts(self) -> &'static [f64] {
        match self {
            Self::HalfSquare => &[0.5],
            Self::PeriodicPhi => &[0.25, 0.75],
            _ => &[],
        }
    }
}

/// Index of the patch containing `p`; ties go to the patch on the upper side.
pub(crate) fn locate(patches: &[Patch], p: [f64; 2]) -> usize {
    patches
        .iter()
        .position(|q| (0..2).all(|a| p[a] >= q.lo[a] && p[a] < q.lo[a] + q.size[a]))
        .unwrap_or(patches.len() - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub alpha: f64,
    pub variant: StreamVariant,
    pub normalization: f64,
}

impl StreamSpec {
    pub fn new(
        alpha: f64,
        variant: StreamVariant,
        normalization: f64,
    ) -> Result<Self, StreamError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(StreamError::AlphaOutOfRange(alpha));
        }
        Ok(Self {
            alpha,
            variant,
            normalization,
        })
    }
}

/// Chain rule through a patch's affine change of variables.
pub(crate) fn to_global<F: Real>(local: Jet<F>, patch: &Patch, scale: F) -> Jet<F> {
    let c = F::lit(patch.coef) * scale;
    let sx = F::lit(patch.size[0]);
    let sy = F::lit(patch.size[1]);
    Jet {
        value: c * local.value,
        grad: [c * local.grad[0] / sx, c * local.grad[1] / sy],
        hess: [
            [
                c * local.hess[0][0] / (sx * sx),
                c * local.hess[0][1] / (sx * sy),
            ],
            [
                c * local.hess[1][0] / (sx * sy),
                c * local.hess[1][1] / (sy * sy),
            ],
        ],
    }
}

pub(crate) fn wrap_point<F: Real>(p: [F; 2], periodic: bool) -> [F; 2] {
    if periodic {
        p.map(|v| v - v.floor())
    } else {
        p
    }
}

/// `normalization · variant[ψ_α]` at `p`, with derivatives up to `order` (higher entries zero).
pub fn eval_stream<F: Real>(
    spec: &StreamSpec,
    p: [F; 2],
    order: u8,
) -> Result<Jet<F>, StreamError> {
    let p = wrap_point(p, spec.variant.is_periodic());
    let pf = p.map(|v| v.to_f64().unwrap());
    if spec.variant.cuts().contains(&pf[0]) {
        return Err(StreamError::OnCut { x: pf.to_vec() });
    }
    let patches = spec.variant.patches(false);
    let patch = &patches[locate(&patches, pf)];
    let x = (p[0] - F::lit(patch.lo[0])) / F::lit(patch.size[0]);
    let y = (p[1] - F::lit(patch.lo[1])) / F::lit(patch.size[1]);
    let alpha = F::lit(spec.alpha);
    let local = if order == 0 {
        Jet {
            value: psi_alpha_value(alpha, x, y),
            ..Jet::zero()
        }
    } else {
        psi_alpha(alpha, x, y)
    };
    let mut out = to_global(local, patch, F::lit(spec.normalization));
    if order < 2 {
        out.hess = [[F::zero(); 2]; 2];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centre_value_is_one() {
        for a in [0.1, 0.5, 3.0 - 5f64.sqrt(), 0.9] {
            assert!((psi_alpha_value(a, 0.5, 0.5) - 1.0).abs() < 1e-15);
            let j = psi_alpha(a, 0.5, 0.5);
            assert!(j.grad[0].abs() < 1e-15 && j.grad[1].abs() < 1e-15);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let a = 0.6f64;
        let h = 1e-6;
        for &(x, y) in &[(0.2, 0.7), (0.45, 0.1), (0.9, 0.55)] {
            let j = psi_alpha(a, x, y);
            let fx = (psi_alpha_value(a, x + h, y) - psi_alpha_value(a, x - h, y)) / (2.0 * h);
            let fy = (psi_alpha_value(a, x, y + h) - psi_alpha_value(a, x, y - h)) / (2.0 * h);
            assert!((j.grad[0] - fx).abs() < 1e-8, "{} {}", j.grad[0], fx);
            assert!((j.grad[1] - fy).abs() < 1e-8);
            let gx = |x: f64, y: f64| psi_alpha(a, x, y).grad;
            let hxx = (gx(x + h, y)[0] - gx(x - h, y)[0]) / (2.0 * h);
            let hxy = (gx(x, y + h)[0] - gx(x, y - h)[0]) / (2.0 * h);
            let hyy = (gx(x, y + h)[1] - gx(x, y - h)[1]) / (2.0 * h);
            assert!((j.hess[0][0] - hxx).abs() < 1e-6);
            assert!((j.hess[0][1] - hxy).abs() < 1e-6);
            assert!((j.hess[1][0] - hxy).abs() < 1e-6);
            assert!((j.hess[1][1] - hyy).abs() < 1e-6);
        }
    }

    #[test]
    fn patches_tile_the_square() {
        for v in [
            StreamVariant::WholeSquare,
            StreamVariant::HalfSquare,
            StreamVariant::PeriodicPsi,
            StreamVariant::PeriodicPhi,
        ] {
            let area: f64 = v.patches(false).iter().map(|p| p.size[0] * p.size[1]).sum();
            assert_eq!(area, 1.0);
        }
    }

    #[test]
    fn half_square_is_odd_about_the_cut() {
        let spec = StreamSpec::new(0.5, StreamVariant::HalfSquare, 1.0).unwrap();
        let a: f64 = eval_stream(&spec, [0.3, 0.4], 0).unwrap().value;
        let b = eval_stream(&spec, [0.7, 0.4], 0).unwrap().value;
        assert!((a + b).abs() < 1e-15 && a < 0.0);
        assert!(matches!(
            eval_stream(&spec, [0.5, 0.4], 1),
            Err(StreamError::OnCut { .. })
        ));
    }
}
