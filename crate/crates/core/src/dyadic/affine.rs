//! Signed-permutation affine maps with power-of-two scalings.

use serde::{Deserialize, Serialize};

use super::boxes::{decompose, DyadicBox};
use super::rational::DyadicRational;

/// `y_i = sign_i · 2^{exp_i} · x_{perm_i} + trans_i`.
///
/// A diagonal map has the identity permutation; quarter rotations permute axes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicAffine {
    pub perm: Vec<usize>,
    pub sign: Vec<i8>,
    pub exp: Vec<i32>,
    pub trans: Vec<DyadicRational>,
}

impl DyadicAffine {
    pub fn identity(dim: usize) -> Self {
        Self {
            perm: (0..dim).collect(),
            sign: vec![1; dim],
            exp: vec![0; dim],
            trans: vec![DyadicRational::ZERO; dim],
        }
    }

    pub fn diagonal(sign: Vec<i8>, exp: Vec<i32>, trans: Vec<DyadicRational>) -> Self {
        let dim = sign.len();
        Self {
            perm: (0..dim).collect(),
            sign,
            exp,
            trans,
        }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Measure preservation: the scale exponents sum to zero.
    pub fn is_measure_preserving(&self) -> bool {
        self.exp.iter().sum::<i32>() == 0
    }

    pub fn apply(&self, x: &[DyadicRational]) -> Vec<DyadicRational> {
        (0..self.dim())
            .map(|i| {
                let v = x[self.perm[i]].mul_pow2(self.exp[i]);
                let v = if self.sign[i] < 0 { -v } else { v };
                v + self.trans[i]
            })
            .collect()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Self) -> Self {
        let d = self.dim();
        let mut out = Self::identity(d);
        for i in 0..d {
            let p = self.perm[i];
            out.perm[i] = inner.perm[p];
            out.sign[i] = self.sign[i] * inner.sign[p];
            out.exp[i] = self.exp[i] + inner.exp[p];
            let t = inner.trans[p].mul_pow2(self.exp[i]);
            out.trans[i] = if self.sign[i] < 0 { -t } else { t } + self.trans[i];
        }
        out
    }

    pub fn inverse(&self) -> Self {
        let d = self.dim();
        let mut out = Self::identity(d);
        for i in 0..d {
            let j = self.perm[i];
            // x_j = sign_i 2^{-exp_i} (y_i - t_i)
            out.perm[j] = i;
            out.sign[j] = self.sign[i];
            out.exp[j] = -self.exp[i];
            let t = self.trans[i].mul_pow2(-self.exp[i]);
            out.trans[j] = if self.sign[i] < 0 { t } else { -t };
        }
        out
    }

    /// Image of the closed box, one `(lo, hi)` pair per output axis.
    pub fn image_bounds(&self, b: &DyadicBox) -> Vec<(DyadicRational, DyadicRational)> {
        (0..self.dim())
            .map(|i| {
                let a = b.axes[self.perm[i]];
                let lo = a.lo().mul_pow2(self.exp[i]);
                let hi = a.hi().mul_pow2(self.exp[i]);
                if self.sign[i] < 0 {
                    (self.trans[i] - hi, self.trans[i] - lo)
                } else {
                    (lo + self.trans[i], hi + self.trans[i])
                }
            })
            .collect()
    }

    /// Pulls back an output-space box of bounds to input-space bounds.
    pub fn preimage_bounds(
        &self,
        bounds: &[(DyadicRational, DyadicRational)],
    ) -> Vec<(DyadicRational, DyadicRational)> {
        let inv = self.inverse();
        let mut out = vec![(DyadicRational::ZERO, DyadicRational::ZERO); self.dim()];
        for (j, slot) in out.iter_mut().enumerate() {
            let (lo, hi) = bounds[inv.perm[j]];
            let a = lo.mul_pow2(inv.exp[j]);
            let b = hi.mul_pow2(inv.exp[j]);
            *slot = if inv.sign[j] < 0 {
                (inv.trans[j] - b, inv.trans[j] - a)
            } else {
                (a + inv.trans[j], b + inv.trans[j])
            };
        }
        out
    }
}

/// All dyadic boxes whose union is the product of the given intervals.
pub fn boxes_from_bounds(bounds: &[(DyadicRational, DyadicRational)]) -> Vec<DyadicBox> {
    let per_axis: Vec<_> = bounds.iter().map(|&(lo, hi)| decompose(lo, hi)).collect();
    if per_axis.iter().any(|v| v.is_empty()) {
        return Vec::new();
    }
    let mut out = vec![Vec::with_capacity(bounds.len())];
    for axis in per_axis {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for iv in &axis {
                let mut p = prefix.clone();
                p.push(*iv);
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter().map(DyadicBox::new).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::rational::dy;
    use proptest::prelude::*;

    fn rot_ccw() -> DyadicAffine {
        // (x, y) -> (1 - y, x)
        DyadicAffine {
            perm: vec![1, 0],
            sign: vec![-1, 1],
            exp: vec![0, 0],
            trans: vec![DyadicRational::ONE, DyadicRational::ZERO],
        }
    }

    #[test]
    fn rotation_has_order_four() {
        let r = rot_ccw();
        let r4 = r.compose(&r).compose(&r).compose(&r);
        assert_eq!(r4, DyadicAffine::identity(2));
        assert_eq!(r.apply(&[dy(1, 3), dy(1, 1)]), vec![dy(1, 1), dy(1, 3)]);
    }

    fn arb_affine() -> impl Strategy<Value = DyadicAffine> {
        (
            any::<bool>(),
            prop::collection::vec(any::<bool>(), 2),
            prop::collection::vec(-3i32..4, 2),
            prop::collection::vec((-64i128..64, 0u32..6), 2),
        )
            .prop_map(|(swap, s, e, t)| DyadicAffine {
                perm: if swap { vec![1, 0] } else { vec![0, 1] },
                sign: s.iter().map(|&b| if b { -1 } else { 1 }).collect(),
                exp: e,
                trans: t.iter().map(|&(n, k)| dy(n, k)).collect(),
            })
    }

    proptest! {
        #[test]
        fn inverse_undoes_apply(a in arb_affine(), x in 0i128..1024, y in 0i128..1024) {
            let p = vec![dy(x, 10), dy(y, 10)];
            prop_assert_eq!(a.inverse().apply(&a.apply(&p)), p);
        }

        #[test]
        fn compose_matches_sequential(a in arb_affine(), b in arb_affine(), x in 0i128..1024, y in 0i128..1024) {
            let p = vec![dy(x, 10), dy(y, 10)];
            prop_assert_eq!(a.compose(&b).apply(&p), a.apply(&b.apply(&p)));
        }
    }
}
