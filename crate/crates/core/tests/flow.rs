use std::sync::{Arc, OnceLock};

use mixlab::dyadic::*;
use mixlab::field::*;
use mixlab::flow::*;
use mixlab::stream::*;
use proptest::prelude::*;

fn table() -> Arc<PeriodTable> {
    static T: OnceLock<Arc<PeriodTable>> = OnceLock::new();
    T.get_or_init(|| Arc::new(PeriodTable::build(ALPHA_STAR, DEFAULT_TABLE_SAMPLES).unwrap()))
        .clone()
}

fn box_2d() -> VelocityProtocol {
    VelocityProtocol::box_2d(table()).unwrap()
}

/// `-½∇^⊥ψ^α` alone for two time units: one full turn of every orbit.
fn whole_square_turn() -> VelocityProtocol {
    let seg = vec![Segment {
        start: 0.0,
        end: 2.0,
        field: FieldDescriptor::MinusV,
    }];
    VelocityProtocol::new(seg, Domain::Box, 2, false, table()).unwrap()
}

fn opts() -> FlowOptions {
    FlowOptions::default()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn bottom_of_level(alpha: f64, r: f64) -> [f64; 2] {
    let (mut lo, mut hi) = (0.0, 0.5);
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if psi_alpha_value(alpha, 0.5, m) > r {
            hi = m;
        } else {
            lo = m;
        }
    }
    [0.5, 0.5 * (lo + hi)]
}

#[test]
fn centre_is_fixed_under_v() {
    let p = whole_square_turn();
    let end = integrate_trajectory(&p, [0.5, 0.5], 0.0, 2.0, &opts()).unwrap();
    assert!(dist(end.x, [0.5, 0.5]) <= opts().tol);
}

#[test]
fn every_orbit_closes_after_unit_time() {
    let p = whole_square_turn();
    for r in [0.5, 0.1, 0.9] {
        let x0 = bottom_of_level(ALPHA_STAR, r);
        let end = integrate_trajectory(&p, x0, 0.0, 2.0, &opts()).unwrap();
        assert!(dist(end.x, x0) < 1e-3, "r = {r}: {:?} vs {:?}", end.x, x0);
        let half = integrate_trajectory(&p, x0, 0.0, 1.0, &opts()).unwrap();
        assert!(dist(half.x, x0) > 0.1);
    }
}

#[test]
fn stream_value_is_conserved_along_its_trajectories() {
    let p = whole_square_turn();
    let stream = SuperStream::new(
        StreamSpec::new(ALPHA_STAR, StreamVariant::WholeSquare, 1.0).unwrap(),
        table(),
        false,
    )
    .unwrap();
    let times: Vec<f64> = (1..=64).map(|i| i as f64 / 32.0).collect();
    for x0 in [[0.2, 0.3], [0.45, 0.05], [0.9, 0.6], [0.02, 0.5]] {
        let v0 = stream.value(x0).unwrap();
        let path = sample_trajectory(&p, x0, &times, &opts()).unwrap();
        for x in path {
            let v = stream.value(x).unwrap();
            assert!(((v - v0) / v0).abs() < 1e-4, "{x0:?}: {v} vs {v0}");
        }
    }
}

#[test]
fn forward_then_backward_returns_home() {
    let p = box_2d();
    let o = opts();
    for x0 in [[0.13, 0.71], [0.52, 0.25], [0.9, 0.95], [0.01, 0.02]] {
        let fwd = integrate_trajectory(&p, x0, 0.0, 0.8, &o).unwrap();
        let back = integrate_trajectory(&p, fwd.x, 0.8, 0.0, &o).unwrap();
        assert!(dist(back.x, x0) <= 10.0 * o.tol, "{x0:?} -> {:?}", back.x);
    }
}

#[test]
fn steps_stay_few_near_the_boundary() {
    let p = box_2d();
    for x0 in [[1e-4, 1e-4], [0.25, 1e-5], [0.999, 0.3], [0.5 - 1e-6, 0.7]] {
        let end = integrate_trajectory(&p, x0, 0.0, 1.0, &opts()).unwrap();
        assert!(end.steps < 5_000, "{x0:?}: {} steps", end.steps);
        assert!(end.x.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn starting_on_a_patch_edge_is_reported() {
    let err = integrate_trajectory(&box_2d(), [0.5, 0.25], 0.0, 0.3, &opts()).unwrap_err();
    assert!(matches!(err, FlowError::BoundaryStall { .. }));
}

#[test]
fn time_one_map_is_the_folded_baker_map() {
    let s = interior_samples::<2>(32, 1.0 / 32.0);
    let cmp = flow_map_vs_discrete(&box_2d(), &baker_t(), 1.0, &s, &opts()).unwrap();
    assert_eq!(cmp.samples, 1024);
    assert!(cmp.max_error <= 1e-3, "{cmp:?}");
    assert!(cmp.max_integrator_error <= opts().tol);
}

#[test]
fn torus_time_one_map_is_t_prime() {
    let p = VelocityProtocol::torus_2d(table()).unwrap();
    let s = interior_samples::<2>(32, 1.0 / 32.0);
    let cmp = flow_map_vs_discrete(&p, &build_t_prime(), 1.0, &s, &opts()).unwrap();
    assert!(cmp.orientation_flip);
    assert!(cmp.max_error <= 1e-3, "{cmp:?}");
}

#[test]
fn torus_without_the_flip_is_not_t_prime() {
    let flipped = VelocityProtocol::torus_2d(table()).unwrap();
    let p =
        VelocityProtocol::new(flipped.schedule.clone(), Domain::Torus, 2, false, table()).unwrap();
    let s = interior_samples::<2>(8, 1.0 / 32.0);
    let cmp = flow_map_vs_discrete(&p, &build_t_prime(), 1.0, &s, &opts()).unwrap();
    assert!(cmp.max_error > 0.1, "{cmp:?}");
}

#[test]
fn rotated_protocol_matches_its_map() {
    let p = VelocityProtocol::box_rotated(table()).unwrap();
    let s = interior_samples::<2>(16, 1.0 / 32.0);
    let cmp = flow_map_vs_discrete(&p, &build_rotated_protocol_map(), 1.0, &s, &opts()).unwrap();
    assert!(cmp.max_error <= 1e-3, "{cmp:?}");
}

#[test]
fn two_periods_match_the_squared_map() {
    let s = interior_samples::<2>(8, 1.0 / 32.0);
    let cmp = flow_map_vs_discrete(&box_2d(), &baker_t(), 2.0, &s, &opts()).unwrap();
    assert!(cmp.max_error <= 1e-3, "{cmp:?}");
}

#[test]
fn three_dimensional_box_protocol_matches_t_d() {
    let p = VelocityProtocol::box_d(3, table()).unwrap();
    let s = interior_samples::<3>(6, 1.0 / 32.0);
    let cmp = flow_map_vs_discrete(&p, &build_t_d(3), p.period, &s, &opts()).unwrap();
    assert!(cmp.max_error <= 1e-3, "{cmp:?}");
}

#[test]
fn zero_time_has_zero_error() {
    let s = interior_samples::<2>(8, 1.0 / 32.0);
    let cmp = flow_map_vs_discrete(&box_2d(), &baker_t(), 0.0, &s, &opts()).unwrap();
    assert_eq!(cmp.max_error, 0.0);
}

#[test]
fn fractional_periods_are_rejected_by_the_map_comparison() {
    let s = interior_samples::<2>(4, 1.0 / 32.0);
    assert!(matches!(
        flow_map_vs_discrete(&box_2d(), &baker_t(), 0.5, &s, &opts()),
        Err(FlowError::Parameter(_))
    ));
}

#[test]
fn flowing_past_a_whole_period_composes() {
    let p = box_2d();
    let o = opts();
    for x0 in [[0.3, 0.2], [0.61, 0.47], [0.85, 0.9]] {
        for t2 in [0.3, 0.5, 0.85] {
            let one = integrate_trajectory(&p, x0, 0.0, 1.0, &o).unwrap();
            let two = integrate_trajectory(&p, one.x, 0.0, t2, &o).unwrap();
            let direct = integrate_trajectory(&p, x0, 0.0, 1.0 + t2, &o).unwrap();
            assert!(dist(two.x, direct.x) < 1e-6, "{x0:?}, {t2}");
        }
    }
}

fn shoelace(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
}

#[test]
fn tracer_polygon_keeps_its_area() {
    let p = box_2d();
    let ring: Vec<[f64; 2]> = (0..1000)
        .map(|i| {
            let th = std::f64::consts::TAU * i as f64 / 1000.0;
            [0.3 + 0.12 * th.cos(), 0.62 + 0.12 * th.sin()]
        })
        .collect();
    let a0 = shoelace(&ring);
    for t in [0.25, 0.5, 0.75, 1.0] {
        let moved = flow_map(&p, &ring, t, &opts()).unwrap();
        let pts: Vec<[f64; 2]> = moved.images.iter().map(|v| [v[0], v[1]]).collect();
        let a = shoelace(&pts);
        assert!(((a - a0) / a0).abs() < 1e-3, "t = {t}: {a} vs {a0}");
    }
}

#[test]
fn trajectory_csv_has_a_header_and_one_row_per_time() {
    let p = box_2d();
    let times = [0.0, 0.25, 0.5, 1.0];
    let xs = sample_trajectory(&p, [0.2, 0.3], &times, &opts()).unwrap();
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &times, &xs).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x1,x2");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0,0.2,0.3"));
}

fn half_split(n: u32) -> ScalarGrid<f64> {
    generate(
        &InitialDataSpec::new(InitialKind::HalfSplit),
        2,
        n,
        Domain::Box,
    )
    .unwrap()
}

#[test]
fn advection_at_time_zero_is_the_identity() {
    let g = half_split(5);
    for mode in [AdvectMode::Hybrid, AdvectMode::SemiLagrangian] {
        let a = advect_scalar(
            &g,
            &box_2d(),
            Some(&baker_t()),
            0.0,
            &AdvectOptions {
                mode,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(a.grid, g);
    }
}

#[test]
fn hybrid_advection_at_whole_periods_is_the_exact_pullback() {
    let g = half_split(7);
    let t = baker_t();
    for k in 1..=3 {
        let a =
            advect_scalar(&g, &box_2d(), Some(&t), k as f64, &AdvectOptions::default()).unwrap();
        assert_eq!(a.exact_periods, k);
        assert_eq!(a.grid, pullback_exact(&g, &t, k).unwrap());
    }
}

/// One period traced by the ODE against the exact pullback. Preimages of cell centres under
/// `T` sit on cell edges of the source grid, so bilinear sampling averages across the
/// interface there while piecewise-constant sampling reads the correct side.
#[test]
fn one_traced_period_agrees_with_the_pullback() {
    let n = 7;
    let g = half_split(n);
    let cell = 1.0 / (1u64 << (2 * n)) as f64;
    let exact = pullback_exact(&g, &baker_t(), 1).unwrap();
    let run = |sampling| {
        let o = AdvectOptions {
            mode: AdvectMode::SemiLagrangian,
            sampling,
            ..Default::default()
        };
        let a = advect_scalar(&g, &box_2d(), None, 1.0, &o).unwrap();
        assert!(a.stalled.is_empty());
        a.grid.l1_distance(&exact) / cell
    };
    assert!(run(Sampling::PiecewiseConstant) <= 2.0);
    let smeared = run(Sampling::Bilinear);
    assert!((smeared - 64.0).abs() < 1.0, "{smeared}");
}

#[test]
fn hybrid_needs_the_map() {
    let g = half_split(3);
    assert!(advect_scalar(&g, &box_2d(), None, 0.5, &AdvectOptions::default()).is_err());
}

/// Pointwise back-trace sampling does not conserve the mean exactly. Whole periods go
/// through the exact pullback and conserve it to round-off; fractional times drift by a few
/// parts in 10⁴ on spectral data at this resolution.
#[test]
fn advected_mean_drift() {
    let g: ScalarGrid<f64> = generate(
        &InitialDataSpec::new(InitialKind::Spectral {
            sigma: 1.0,
            seed: 1,
            cutoff: None,
        }),
        2,
        6,
        Domain::Box,
    )
    .unwrap();
    let m0 = g.mean();
    let p = box_2d();
    let t = baker_t();
    let mut worst = 0.0f64;
    for time in [0.3, 0.75, 1.0, 1.4, 2.0, 2.5, 3.0] {
        let a = advect_scalar(&g, &p, Some(&t), time, &AdvectOptions::default()).unwrap();
        let drift = (a.grid.mean() - m0).abs();
        if time.fract() == 0.0 {
            assert!(drift < 1e-12, "t = {time}: {drift:e}");
        } else {
            worst = worst.max(drift);
        }
    }
    eprintln!("worst fractional-time mean drift {worst:e}");
    assert!(worst < 2e-3, "{worst:e}");
}

#[test]
fn interior_pairs_separate_linearly() {
    let r = holder_probe(
        &box_2d(),
        HolderRegion::Interior,
        &[6, 7, 8, 9, 10],
        &opts(),
    )
    .unwrap();
    assert!(r.beta >= 0.9 && r.beta < 1.1, "{r:?}");
    assert_eq!(r.checkpoints_per_segment, CHECKPOINTS_PER_SEGMENT);
}

#[test]
fn corner_pairs_have_a_stable_positive_exponent() {
    let r = holder_probe(
        &box_2d(),
        HolderRegion::Corner,
        &[6, 7, 8, 9, 10, 11],
        &opts(),
    )
    .unwrap();
    eprintln!(
        "corner beta {} C {} local {:?}",
        r.beta, r.constant, r.local_slopes
    );
    assert!(r.beta > 0.0 && r.stable, "{r:?}");
}

#[test]
fn too_few_scales_is_an_error() {
    assert!(matches!(
        holder_probe(&box_2d(), HolderRegion::Interior, &[6, 7, 8, 9], &opts()),
        Err(FlowError::Parameter(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trajectories_stay_in_the_square(x in 0.001f64..0.999, y in 0.001f64..0.999, t in 0.0f64..2.0) {
        let end = integrate_trajectory(&box_2d(), [x, y], 0.0, t, &opts()).unwrap();
        prop_assert!(end.x.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(end.error <= opts().tol);
    }
}
