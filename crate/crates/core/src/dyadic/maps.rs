//! Constructors for the folded Baker map and the maps derived from it.

use super::affine::DyadicAffine;
use super::boxes::{DyadicBox, DyadicInterval};
use super::map::{AffineBranch, PiecewiseDyadicAffineMap};
use super::rational::{dy, DyadicRational};

fn two_branch(
    label: &str,
    left_t: [DyadicRational; 2],
    right_t: [DyadicRational; 2],
) -> PiecewiseDyadicAffineMap {
    let left = DyadicBox::new(vec![DyadicInterval::new(1, 0), DyadicInterval::FULL]);
    let right = DyadicBox::new(vec![DyadicInterval::new(1, 1), DyadicInterval::FULL]);
    PiecewiseDyadicAffineMap::new(
        label,
        2,
        vec![
            AffineBranch::new(
                left,
                DyadicAffine::diagonal(vec![-1, -1], vec![1, -1], left_t.to_vec()),
                false,
            ),
            AffineBranch::new(
                right,
                DyadicAffine::diagonal(vec![1, 1], vec![1, -1], right_t.to_vec()),
                false,
            ),
        ],
    )
}

/// The folded Baker map: `-(2x, y/2) + (1, 1/2)` on the left half,
/// `(2x, y/2) + (-1, 1/2)` on the right half.
pub fn baker_t() -> PiecewiseDyadicAffineMap {
    two_branch("T", [dy(1, 0), dy(1, 1)], [dy(-1, 0), dy(1, 1)])
}

/// The companion map `T̃`: `-(2x, y/2) + (1, 1)` on the left half, `(2x, y/2) + (-1, 0)` on the right.
pub fn baker_t_tilde() -> PiecewiseDyadicAffineMap {
    two_branch("T~", [dy(1, 0), dy(1, 0)], [dy(-1, 0), dy(0, 0)])
}

/// The classical unfolded Baker map `B`, kept as a comparison fixture.
pub fn baker_unfolded() -> PiecewiseDyadicAffineMap {
    let left = DyadicBox::new(vec![DyadicInterval::new(1, 0), DyadicInterval::FULL]);
    let right = DyadicBox::new(vec![DyadicInterval::new(1, 1), DyadicInterval::FULL]);
    PiecewiseDyadicAffineMap::new(
        "B",
        2,
        vec![
            AffineBranch::new(
                left,
                DyadicAffine::diagonal(vec![1, 1], vec![1, -1], vec![dy(0, 0), dy(0, 0)]),
                false,
            ),
            AffineBranch::new(
                right,
                DyadicAffine::diagonal(vec![1, 1], vec![1, -1], vec![dy(-1, 0), dy(1, 1)]),
                false,
            ),
        ],
    )
}

/// Counterclockwise quarter rotation of the unit square, `(x, y) ↦ (1 - y, x)`.
pub fn rotation_r() -> PiecewiseDyadicAffineMap {
    let aff = DyadicAffine {
        perm: vec![1, 0],
        sign: vec![-1, 1],
        exp: vec![0, 0],
        trans: vec![DyadicRational::ONE, DyadicRational::ZERO],
    };
    PiecewiseDyadicAffineMap::new(
        "R",
        2,
        vec![AffineBranch::new(DyadicBox::unit(2), aff, false)],
    )
}

/// `R^m` for any integer `m` (negative powers rotate clockwise).
pub fn rotation_power(m: i32) -> PiecewiseDyadicAffineMap {
    let r = rotation_r();
    let mut out = identity(2);
    for _ in 0..m.rem_euclid(4) {
        out = r.compose(&out);
    }
    out.label = format!("R^{m}");
    out
}

pub fn identity(dim: usize) -> PiecewiseDyadicAffineMap {
    PiecewiseDyadicAffineMap::new(
        "Id",
        dim,
        vec![AffineBranch::new(
            DyadicBox::unit(dim),
            DyadicAffine::identity(dim),
            false,
        )],
    )
}

/// Translation by `shift` modulo 1 on the torus; each branch is a dyadic box whose image
/// does not cross the seam.
pub fn torus_translation(shift: &[DyadicRational]) -> PiecewiseDyadicAffineMap {
    let dim = shift.len();
    let per_axis: Vec<Vec<DyadicInterval>> = shift
        .iter()
        .map(|&s| {
            let s = s.fract();
            let cut = DyadicRational::ONE - s;
            let mut pieces = super::boxes::decompose(DyadicRational::ZERO, cut);
            pieces.extend(super::boxes::decompose(cut, DyadicRational::ONE));
            pieces
        })
        .collect();
    let mut domains: Vec<Vec<DyadicInterval>> = vec![Vec::new()];
    for axis in &per_axis {
        domains = domains
            .iter()
            .flat_map(|p| {
                axis.iter().map(move |iv| {
                    let mut q = p.clone();
                    q.push(*iv);
                    q
                })
            })
            .collect();
    }
    let aff = DyadicAffine::diagonal(vec![1; dim], vec![0; dim], shift.to_vec());
    let branches = domains
        .into_iter()
        .map(|axes| AffineBranch::new(DyadicBox::new(axes), aff.clone(), true))
        .collect();
    PiecewiseDyadicAffineMap::new("shift", dim, branches)
}

/// Embeds a planar map into `Q_d`, acting on axes `(i, j)` and fixing the others.
pub fn embed_plane(
    map: &PiecewiseDyadicAffineMap,
    dim: usize,
    i: usize,
    j: usize,
) -> PiecewiseDyadicAffineMap {
    assert_eq!(map.dim, 2);
    assert!(i != j && i < dim && j < dim);
    let plane = [i, j];
    let branches = map
        .branches
        .iter()
        .map(|b| {
            let mut axes = vec![DyadicInterval::FULL; dim];
            axes[i] = b.domain.axes[0];
            axes[j] = b.domain.axes[1];
            let mut aff = DyadicAffine::identity(dim);
            for (local, &global) in plane.iter().enumerate() {
                aff.perm[global] = plane[b.affine.perm[local]];
                aff.sign[global] = b.affine.sign[local];
                aff.exp[global] = b.affine.exp[local];
                aff.trans[global] = b.affine.trans[local];
            }
            AffineBranch::new(DyadicBox::new(axes), aff, b.torus_wrap)
        })
        .collect();
    PiecewiseDyadicAffineMap::new(format!("{}[{},{}]", map.label, i + 1, j + 1), dim, branches)
}

/// `T_d = T_{d,d-1} ∘ ⋯ ∘ T_{d,1}`, where `T_{d,i}` acts as `T` in the `(x_i, x_d)` plane.
pub fn build_t_d(d: usize) -> PiecewiseDyadicAffineMap {
    assert!(d >= 2, "T_d needs d >= 2");
    build_stack(&baker_t(), d, &format!("T_{d}"))
}

fn build_stack(
    planar: &PiecewiseDyadicAffineMap,
    d: usize,
    label: &str,
) -> PiecewiseDyadicAffineMap {
    let mut out = embed_plane(planar, d, 0, d - 1);
    for i in 1..d - 1 {
        out = embed_plane(planar, d, i, d - 1).compose(&out);
    }
    out.label = label.to_string();
    out
}

/// The four cells of `G_1`, in the order lower-left, lower-right, upper-left, upper-right.
pub fn half_cells() -> [DyadicBox; 4] {
    [
        DyadicBox::rect(1, 0, 1, 0),
        DyadicBox::rect(1, 0, 1, 1),
        DyadicBox::rect(1, 1, 1, 0),
        DyadicBox::rect(1, 1, 1, 1),
    ]
}

/// Cellwise action on the torus: `T`, `R²T`, `T̃`, `R²T̃` on the lower-left, lower-right,
/// upper-left and upper-right cells of `G_1`.
pub fn cell_action() -> PiecewiseDyadicAffineMap {
    let r2 = rotation_power(2);
    let t = baker_t();
    let tt = baker_t_tilde();
    let actions = [t.clone(), r2.compose(&t), tt.clone(), r2.compose(&tt)];
    let branches = half_cells()
        .iter()
        .zip(actions.iter())
        .flat_map(|(cell, m)| m.conjugate_into(cell))
        .map(|b| AffineBranch::new(b.domain, b.affine, true))
        .collect();
    PiecewiseDyadicAffineMap::new("cells", 2, branches)
}

/// The torus map `T′`: translation by `(1/4, 1/4)` followed by [`cell_action`].
pub fn build_t_prime() -> PiecewiseDyadicAffineMap {
    let shift = torus_translation(&[dy(1, 2), dy(1, 2)]);
    let mut m = cell_action().compose(&shift);
    m.label = "T'".into();
    m
}

/// `T′_d`, built from `T′` as `T_d` is built from `T`.
pub fn build_t_prime_d(d: usize) -> PiecewiseDyadicAffineMap {
    assert!(d >= 2);
    build_stack(&build_t_prime(), d, &format!("T'_{d}"))
}

/// Time-one map of the protocol that replaces `-v` by the rotated copy of `w`: `R^{-2} T^2`.
pub fn build_rotated_protocol_map() -> PiecewiseDyadicAffineMap {
    let t = baker_t();
    let mut m = rotation_power(-2).compose(&t.compose(&t));
    m.label = "R^-2 T^2".into();
    m
}

/// First step `h` with `|M^s(Q′) ∩ Q| = |Q| |Q′|` for every pair of level-`k` cubes and all
/// `s ≥ h`, for maps recognised as `T`, `T_d`, `T′` or `T′_d`: `k + ⌈k/(d-1)⌉` (`2k` in the
/// plane), the `T′` family only from `k = 2`.
pub fn equidistribution_horizon(map: &PiecewiseDyadicAffineMap, k: u32) -> Option<usize> {
    let d = map.dim;
    if d < 2 {
        return None;
    }
    let same = |m: PiecewiseDyadicAffineMap| m.branches == map.branches;
    let baker = if d == 2 {
        same(baker_t())
    } else {
        same(build_t_d(d))
    };
    let primed = k >= 2
        && if d == 2 {
            same(build_t_prime())
        } else {
            same(build_t_prime_d(d))
        };
    (baker || primed).then(|| k as usize + (k as usize).div_ceil(d - 1))
}
