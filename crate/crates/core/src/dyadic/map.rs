//! Piecewise dyadic-affine maps on the unit cube.

use serde::{Deserialize, Serialize};

use super::affine::{boxes_from_bounds, DyadicAffine};
use super::boxes::{merge_boxes, DyadicBox, DyadicInterval};
use super::rational::DyadicRational;
use super::DyadicError;

/// Default cap on the per-axis scale exponent of boxes produced by iteration.
pub const DEFAULT_DEPTH_CAP: u32 = 64;

/// One affine piece: `domain` is mapped bijectively by `affine`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineBranch {
    pub domain: DyadicBox,
    pub affine: DyadicAffine,
    /// Images are reduced modulo 1 (the map lives on the torus).
    pub torus_wrap: bool,
}

impl AffineBranch {
    /// With `torus_wrap`, the integer part of the image is folded into the translation so
    /// that the image of the domain lies in `[0, 1]^d`; the image must not straddle an
    /// integer hyperplane.
    pub fn new(domain: DyadicBox, mut affine: DyadicAffine, torus_wrap: bool) -> Self {
        debug_assert!(affine.is_measure_preserving());
        if torus_wrap {
            for (i, (lo, hi)) in affine.image_bounds(&domain).into_iter().enumerate() {
                let shift = DyadicRational::from_int(lo.floor());
                assert!(
                    hi - shift <= DyadicRational::ONE,
                    "wrapped branch image straddles the torus seam"
                );
                affine.trans[i] = affine.trans[i] - shift;
            }
        }
        Self {
            domain,
            affine,
            torus_wrap,
        }
    }

    fn map_point(&self, x: &[DyadicRational]) -> Vec<DyadicRational> {
        self.affine.apply(x)
    }

    fn image_bounds(&self, b: &DyadicBox) -> Vec<(DyadicRational, DyadicRational)> {
        self.affine.image_bounds(b)
    }
}

/// A measure-preserving map given by a list of affine branches on disjoint dyadic boxes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PiecewiseDyadicAffineMap {
    pub label: String,
    pub dim: usize,
    pub branches: Vec<AffineBranch>,
}

impl PiecewiseDyadicAffineMap {
    pub fn new(label: impl Into<String>, dim: usize, branches: Vec<AffineBranch>) -> Self {
        Self {
            label: label.into(),
            dim,
            branches,
        }
    }

    pub fn is_torus(&self) -> bool {
        self.branches.iter().any(|b| b.torus_wrap)
    }

    /// Exact image of a point; points on a branch boundary are rejected.
    pub fn apply(&self, x: &[DyadicRational]) -> Result<Vec<DyadicRational>, DyadicError> {
        self.branches
            .iter()
            .find(|b| b.domain.contains_open(x))
            .map(|b| b.map_point(x))
            .ok_or_else(|| DyadicError::CutPoint {
                point: x.iter().map(|v| v.to_string()).collect(),
            })
    }

    /// The map with every branch inverted.
    pub fn inverse(&self) -> Self {
        let branches = self
            .branches
            .iter()
            .flat_map(|b| {
                let inv = b.affine.inverse();
                boxes_from_bounds(&b.image_bounds(&b.domain))
                    .into_iter()
                    .map(move |dom| AffineBranch::new(dom, inv.clone(), b.torus_wrap))
            })
            .collect();
        Self::new(format!("{}^-1", self.label), self.dim, branches)
    }

    /// Appends the pieces of `M(b)` to `out` without merging.
    pub fn image_of_box_into(&self, b: &DyadicBox, out: &mut Vec<DyadicBox>) {
        for br in &self.branches {
            if let Some(piece) = b.intersect(&br.domain) {
                let bounds = br.image_bounds(&piece);
                let aligned: Option<Vec<DyadicInterval>> = bounds
                    .iter()
                    .map(|&(lo, hi)| DyadicInterval::from_bounds(lo, hi))
                    .collect();
                match aligned {
                    Some(axes) => out.push(DyadicBox::new(axes)),
                    None => out.extend(boxes_from_bounds(&bounds)),
                }
            }
        }
    }

    /// Exact image of a dyadic box as the minimal sorted list of dyadic boxes.
    pub fn image_of_box(&self, b: &DyadicBox) -> Vec<DyadicBox> {
        let mut out = Vec::new();
        self.image_of_box_into(b, &mut out);
        merge_boxes(out)
    }

    /// `M^n(b)`, merged after each step; fails once any scale exceeds `cap`.
    pub fn iterate_box(
        &self,
        b: &DyadicBox,
        n: usize,
        cap: u32,
    ) -> Result<Vec<DyadicBox>, DyadicError> {
        let mut cur = vec![b.clone()];
        for step in 0..n {
            let mut next = Vec::new();
            for piece in &cur {
                self.image_of_box_into(piece, &mut next);
            }
            cur = merge_boxes(next);
            if let Some(bad) = cur.iter().find(|x| x.max_scale() > cap) {
                return Err(DyadicError::DepthOverflow {
                    step: step + 1,
                    scale: bad.max_scale(),
                    cap,
                });
            }
        }
        Ok(cur)
    }

    /// `M^n(b)` as a disjoint list without merging; used by hot loops.
    pub fn iterate_box_raw(
        &self,
        b: &DyadicBox,
        n: usize,
        cap: u32,
    ) -> Result<Vec<DyadicBox>, DyadicError> {
        let mut cur = vec![b.clone()];
        let mut next = Vec::new();
        for step in 0..n {
            next.clear();
            for piece in &cur {
                self.image_of_box_into(piece, &mut next);
            }
            std::mem::swap(&mut cur, &mut next);
            if let Some(bad) = cur.iter().find(|x| x.max_scale() > cap) {
                return Err(DyadicError::DepthOverflow {
                    step: step + 1,
                    scale: bad.max_scale(),
                    cap,
                });
            }
        }
        Ok(cur)
    }

    /// `self ∘ first` as a branch list on a common refinement.
    pub fn compose(&self, first: &Self) -> Self {
        assert_eq!(self.dim, first.dim);
        let mut branches = Vec::new();
        for b1 in &first.branches {
            let img = b1.image_bounds(&b1.domain);
            let aff1 = &b1.affine;
            for b2 in &self.branches {
                let cut: Option<Vec<_>> = img
                    .iter()
                    .zip(&b2.domain.axes)
                    .map(|(&(lo, hi), d)| {
                        let l = lo.max(d.lo());
                        let h = hi.min(d.hi());
                        (l < h).then_some((l, h))
                    })
                    .collect();
                let Some(cut) = cut else { continue };
                let pre = aff1.preimage_bounds(&cut);
                let aff = b2.affine.compose(aff1);
                for dom in boxes_from_bounds(&pre) {
                    branches.push(AffineBranch::new(
                        dom,
                        aff.clone(),
                        b1.torus_wrap || b2.torus_wrap,
                    ));
                }
            }
        }
        Self::new(
            format!("{}∘{}", self.label, first.label),
            self.dim,
            branches,
        )
    }

    /// Conjugates the map into the sub-cube `cell` via `X ↦ lo + X/2^k` on every axis.
    pub fn conjugate_into(&self, cell: &DyadicBox) -> Vec<AffineBranch> {
        let sign = vec![1i8; self.dim];
        let exp: Vec<i32> = cell.axes.iter().map(|a| -(a.k as i32)).collect();
        let trans: Vec<DyadicRational> = cell.axes.iter().map(|a| a.lo()).collect();
        let s = DyadicAffine::diagonal(sign, exp, trans);
        let s_inv = s.inverse();
        self.branches
            .iter()
            .flat_map(|b| {
                let aff = s.compose(&b.affine).compose(&s_inv);
                boxes_from_bounds(&s.image_bounds(&b.domain))
                    .into_iter()
                    .map(move |dom| AffineBranch::new(dom, aff.clone(), false))
            })
            .collect()
    }

    /// Total measure of the branch domains; equals 1 for a full map.
    pub fn domain_measure(&self) -> DyadicRational {
        self.branches
            .iter()
            .fold(DyadicRational::ZERO, |acc, b| acc + b.domain.measure())
    }
}

/// Exact measure of `(∪ boxes) ∩ b` for pairwise disjoint `boxes`.
pub fn intersection_measure(boxes: &[DyadicBox], b: &DyadicBox) -> DyadicRational {
    boxes
        .iter()
        .filter_map(|x| x.intersect(b))
        .fold(DyadicRational::ZERO, |acc, x| acc + x.measure())
}
