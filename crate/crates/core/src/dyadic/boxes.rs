//! Dyadic intervals and axis-aligned dyadic boxes.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::rational::DyadicRational;

/// The open interval `(j / 2^k, (j + 1) / 2^k)` with `0 <= j < 2^k`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub k: u32,
    pub j: i128,
}

impl DyadicInterval {
    pub const FULL: Self = Self { k: 0, j: 0 };

    pub fn new(k: u32, j: i128) -> Self {
        assert!(k < 126, "dyadic scale {k} out of range");
        assert!(
            j >= 0 && j < (1i128 << k),
            "index {j} out of range for scale {k}"
        );
        Self { k, j }
    }

    pub fn lo(self) -> DyadicRational {
        DyadicRational::new(self.j, self.k)
    }

    pub fn hi(self) -> DyadicRational {
        DyadicRational::new(self.j + 1, self.k)
    }

    pub fn length(self) -> DyadicRational {
        DyadicRational::new(1, self.k)
    }

    /// True when `self` is contained in `other`.
    pub fn within(self, other: Self) -> bool {
        self.k >= other.k && (self.j >> (self.k - other.k)) == other.j
    }

    /// Dyadic intervals are nested or disjoint, so the intersection is one of the two or empty.
    pub fn intersect(self, other: Self) -> Option<Self> {
        if self.within(other) {
            Some(self)
        } else if other.within(self) {
            Some(other)
        } else {
            None
        }
    }

    pub fn contains_open(self, x: DyadicRational) -> bool {
        x > self.lo() && x < self.hi()
    }

    /// The other half of the parent interval, if any.
    pub fn sibling(self) -> Option<Self> {
        (self.k > 0).then(|| Self {
            k: self.k,
            j: self.j ^ 1,
        })
    }

    pub fn parent(self) -> Option<Self> {
        (self.k > 0).then(|| Self {
            k: self.k - 1,
            j: self.j >> 1,
        })
    }

    /// Recognises `[lo, hi]` as a dyadic interval inside `[0, 1]`.
    pub fn from_bounds(lo: DyadicRational, hi: DyadicRational) -> Option<Self> {
        let len = hi - lo;
        if len.numerator() != 1 || lo < DyadicRational::ZERO || hi > DyadicRational::ONE {
            return None;
        }
        let k = len.exponent();
        let scaled = lo.mul_pow2(k as i32);
        scaled
            .is_integer()
            .then(|| Self::new(k, scaled.numerator()))
    }
}

impl fmt::Debug for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "I({},{})", self.k, self.j)
    }
}

/// Splits `[lo, hi] ⊂ [0, 1]` into the minimal list of dyadic intervals, left to right.
pub fn decompose(lo: DyadicRational, hi: DyadicRational) -> Vec<DyadicInterval> {
    let mut out = Vec::new();
    let mut cur = lo;
    while cur < hi {
        // Largest aligned block starting at `cur`.
        let mut k = if cur.is_zero() { 0 } else { cur.exponent() };
        while cur + DyadicRational::new(1, k) > hi {
            k += 1;
        }
        let j = cur.mul_pow2(k as i32).numerator();
        out.push(DyadicInterval::new(k, j));
        cur = cur + DyadicRational::new(1, k);
    }
    out
}

/// A product of dyadic intervals, one per axis.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicBox {
    pub axes: Vec<DyadicInterval>,
}

impl DyadicBox {
    pub fn new(axes: Vec<DyadicInterval>) -> Self {
        assert!(axes.len() >= 2, "boxes live in dimension d >= 2");
        Self { axes }
    }

    /// The whole cube `Q_d`.
    pub fn unit(dim: usize) -> Self {
        Self::new(vec![DyadicInterval::FULL; dim])
    }

    /// `H^j_k ∩ V^{j'}_{k'}` in two dimensions.
    pub fn rect(k: u32, j: i128, kp: u32, jp: i128) -> Self {
        Self::new(vec![DyadicInterval::new(kp, jp), DyadicInterval::new(k, j)])
    }

    /// Horizontal strip `H^j_k` of `Q_dim` (thin in the last axis).
    pub fn horizontal(dim: usize, k: u32, j: i128) -> Self {
        let mut axes = vec![DyadicInterval::FULL; dim];
        axes[dim - 1] = DyadicInterval::new(k, j);
        Self::new(axes)
    }

    /// Box of `G^d_{k,k'}` with vertical index `jd` and horizontal indices `jh`.
    pub fn slab_box(k: u32, jd: i128, kp: u32, jh: &[i128]) -> Self {
        let mut axes: Vec<DyadicInterval> =
            jh.iter().map(|&j| DyadicInterval::new(kp, j)).collect();
        axes.push(DyadicInterval::new(k, jd));
        Self::new(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Exactly `2^{-Σ k_i}`.
    pub fn measure(&self) -> DyadicRational {
        DyadicRational::new(1, self.axes.iter().map(|a| a.k).sum())
    }

    pub fn max_scale(&self) -> u32 {
        self.axes.iter().map(|a| a.k).max().unwrap_or(0)
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let axes = self
            .axes
            .iter()
            .zip(&other.axes)
            .map(|(a, b)| a.intersect(*b))
            .collect::<Option<Vec<_>>>()?;
        Some(Self { axes })
    }

    pub fn within(&self, other: &Self) -> bool {
        self.axes.iter().zip(&other.axes).all(|(a, b)| a.within(*b))
    }

    pub fn contains_open(&self, x: &[DyadicRational]) -> bool {
        self.axes.iter().zip(x).all(|(a, &v)| a.contains_open(v))
    }

    /// Ordering key: lower corner per axis, then scale per axis.
    fn sort_key(&self) -> Vec<(DyadicRational, u32)> {
        self.axes.iter().map(|a| (a.lo(), a.k)).collect()
    }
}

impl PartialOrd for DyadicBox {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicBox {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl fmt::Debug for DyadicBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Box[")?;
        for (i, a) in self.axes.iter().enumerate() {
            if i > 0 {
                write!(f, " x ")?;
            }
            write!(f, "({}, {})", a.lo(), a.hi())?;
        }
        write!(f, "]")
    }
}

/// Repeatedly merges sibling boxes until the union is written with as few boxes as the
/// dyadic tree allows, then sorts lexicographically.
pub fn merge_boxes(boxes: Vec<DyadicBox>) -> Vec<DyadicBox> {
    use std::collections::HashSet;
    let mut set: HashSet<DyadicBox> = boxes.into_iter().collect();
    loop {
        let mut merged = false;
        let mut current: Vec<DyadicBox> = set.iter().cloned().collect();
        current.sort();
        for b in current {
            if !set.contains(&b) {
                continue;
            }
            for axis in 0..b.dim() {
                let Some(sib) = b.axes[axis].sibling() else {
                    continue;
                };
                let mut other = b.clone();
                other.axes[axis] = sib;
                if set.contains(&other) {
                    set.remove(&b);
                    set.remove(&other);
                    let mut parent = b.clone();
                    parent.axes[axis] = b.axes[axis].parent().unwrap();
                    set.insert(parent);
                    merged = true;
                    break;
                }
            }
        }
        if !merged {
            break;
        }
    }
    let mut out: Vec<DyadicBox> = set.into_iter().collect();
    out.sort();
    out
}
