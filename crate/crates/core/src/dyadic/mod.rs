//! Exact dyadic arithmetic: rationals, boxes, piecewise affine maps and the
//! exhaustive rectangle-lemma checks.

mod affine;
mod boxes;
mod map;
pub mod maps;
mod rational;
mod verify;

pub use affine::{boxes_from_bounds, DyadicAffine};
pub use boxes::{decompose, merge_boxes, DyadicBox, DyadicInterval};
pub use map::{intersection_measure, AffineBranch, PiecewiseDyadicAffineMap, DEFAULT_DEPTH_CAP};
pub use maps::{
    baker_t, baker_t_tilde, build_rotated_protocol_map, build_t_d, build_t_prime, build_t_prime_d,
    equidistribution_horizon, rotation_power, rotation_r,
};
pub use rational::{dy, DyadicRational};
pub use verify::{
    verify_equidistribution, verify_rectangle_lemmas, LemmaFailure, LemmaVariant,
    VerificationReport,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DyadicError {
    #[error("point {point:?} lies on a branch boundary")]
    CutPoint { point: Vec<String> },
    #[error("box scale {scale} exceeds the depth cap {cap} at step {step}")]
    DepthOverflow { step: usize, scale: u32, cap: u32 },
}
