use std::sync::{Arc, OnceLock};

use mixlab::field::Domain;
use mixlab::stream::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn table() -> Arc<PeriodTable> {
    static T: OnceLock<Arc<PeriodTable>> = OnceLock::new();
    T.get_or_init(|| Arc::new(PeriodTable::build(ALPHA_STAR, DEFAULT_TABLE_SAMPLES).unwrap()))
        .clone()
}

fn interior(rng: &mut ChaCha8Rng, margin: f64) -> [f64; 2] {
    [
        rng.gen_range(margin..1.0 - margin),
        rng.gen_range(margin..1.0 - margin),
    ]
}

/// Point `(0.5, y)` with `y < 1/2` on the level `ψ_α = r`, by bisection.
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
fn alpha_star_value() {
    assert_eq!(ALPHA_STAR, 3.0 - 5f64.sqrt());
}

#[test]
fn psi_vanishes_on_the_boundary() {
    for a in [0.2, 0.5, ALPHA_STAR] {
        for i in 0..=64 {
            let s = i as f64 / 64.0;
            for p in [[s, 0.0], [s, 1.0], [0.0, s], [1.0, s]] {
                assert!(psi_alpha_value(a, p[0], p[1]).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn psi_symmetries_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let a = rng.gen_range(0.01..0.99);
        let [x, y] = interior(&mut rng, 0.0);
        let v = psi_alpha_value(a, x, y);
        assert!((v - psi_alpha_value(a, y, x)).abs() < 1e-14);
        assert!((v - psi_alpha_value(a, 1.0 - x, y)).abs() < 1e-14);
        assert!((v - psi_alpha_value(a, x, 1.0 - y)).abs() < 1e-14);
        assert!(v > 0.0 && v <= 1.0);
    }
}

#[test]
fn coarea_and_orbit_agree() {
    for a in [0.3, 0.5, ALPHA_STAR] {
        for r in [0.05, 0.2, 0.5, 0.8, 0.95] {
            let c = period_t(a, r, PeriodMethod::Coarea).unwrap();
            let o = period_t(a, r, PeriodMethod::Orbit).unwrap();
            assert!((c / o - 1.0).abs() < 5e-3, "alpha {a} r {r}: {c} vs {o}");
        }
    }
}

#[test]
fn period_near_the_maximum() {
    let limit = period_at_max(ALPHA_STAR);
    assert!((limit - (5f64.sqrt() + 1.0) / std::f64::consts::PI).abs() < 1e-14);
    assert!((limit - 1.0300).abs() < 1e-4);
    let orbit = period_orbit(ALPHA_STAR, 0.999).unwrap();
    assert!((orbit / limit - 1.0).abs() < 1e-3);
    let coarea = period_coarea(ALPHA_STAR, 0.999).unwrap();
    assert!((coarea / limit - 1.0).abs() < 1e-3);
}

#[test]
fn period_near_the_boundary_is_bounded_by_c_over_alpha() {
    // C(r) = max_α α T_α(r): one constant for every α, stable across small levels.
    let alphas = [0.05, 0.1, 0.3, 0.5, ALPHA_STAR];
    let fitted: Vec<f64> = [1e-4, 1e-3, 1e-2]
        .iter()
        .map(|&r| {
            alphas
                .iter()
                .map(|&a| a * period_coarea(a, r).unwrap())
                .fold(0.0, f64::max)
        })
        .collect();
    let (lo, hi) = fitted
        .iter()
        .fold((f64::MAX, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(hi.is_finite() && hi / lo < 1.25, "{fitted:?}");
    for a in alphas {
        assert!(a * period_at_boundary(a) < 2.0 * hi);
    }
}

#[test]
fn boundary_anchor_is_the_small_level_limit() {
    for a in [0.3, 0.5, ALPHA_STAR] {
        let t0 = period_at_boundary(a);
        let near = period_coarea(a, 1e-9).unwrap();
        assert!((near / t0 - 1.0).abs() < 0.02, "alpha {a}: {near} vs {t0}");
    }
}

#[test]
fn level_errors() {
    assert!(matches!(
        period_t(0.5, 0.0, PeriodMethod::Orbit),
        Err(StreamError::LevelOutOfRange(_))
    ));
    assert!(matches!(
        period_t(0.5, 1.5, PeriodMethod::Coarea),
        Err(StreamError::LevelOutOfRange(_))
    ));
    assert!(matches!(
        period_t(0.0, 0.5, PeriodMethod::Coarea),
        Err(StreamError::AlphaOutOfRange(_))
    ));
}

#[test]
fn table_values_and_cross_validation() {
    let t = table();
    assert!(t.t.iter().all(|&v| v > 0.0 && v.is_finite()));
    assert!(t.r.len() >= 64 && t.r[0] <= 1e-6 && t.r[t.r.len() - 1] >= 1.0 - 1e-6);
    let direct = period_coarea(ALPHA_STAR, 0.37).unwrap();
    assert!((t.period(0.37) / direct - 1.0).abs() < 2e-3);
    for r in [0.013, 0.21, 0.5555, 0.93, 0.9991] {
        let direct = period_coarea(ALPHA_STAR, r).unwrap();
        assert!((t.period(r) / direct - 1.0).abs() < 2e-3);
    }
}

#[test]
fn total_integral_of_period_is_the_area() {
    // ∫_0^1 T = |Q| by the coarea formula.
    assert!((table().total() - 1.0).abs() < 1e-6);
}

#[test]
fn envelope_holds_for_several_alphas() {
    for a in [0.3, 0.5, ALPHA_STAR] {
        let t = PeriodTable::build(a, 96).unwrap();
        for k in 0..2 {
            let full = t.envelope_constant(k, TABLE_R_MIN, 1.0 - TABLE_R_MIN);
            let mid = t.envelope_constant(k, 0.01, 0.99);
            assert!(
                full.is_finite() && full <= 10.0 * mid,
                "alpha {a} k {k}: {full} vs {mid}"
            );
        }
    }
}

#[test]
fn table_json_round_trip_and_cache() {
    let t = PeriodTable::build(0.5, 64).unwrap();
    let back = PeriodTable::from_json(&t.to_json().unwrap()).unwrap();
    assert_eq!(back.period(0.123), t.period(0.123));
    let dir = std::env::temp_dir().join(format!("mixlab-period-{}", std::process::id()));
    let built = PeriodTable::load_or_build(&dir, 0.5, 64).unwrap();
    let path = PeriodTable::cache_path(&dir, 0.5, 64, PeriodMethod::Coarea);
    assert!(path.exists());
    let cached = PeriodTable::load_or_build(&dir, 0.5, 64).unwrap();
    assert_eq!(built.t, cached.t);
    std::fs::remove_dir_all(&dir).unwrap();
    assert!(matches!(
        PeriodTable::build(0.5, 63),
        Err(StreamError::TableTooSmall(63))
    ));
}

#[test]
fn super_stream_shares_level_sets() {
    let t = table();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let p = interior(&mut rng, 0.01);
        let r = psi_alpha_value(ALPHA_STAR, p[0], p[1]);
        // Another point on the same level: walk down from the centre along x = x'.
        let x = rng.gen_range(0.01..0.99);
        if psi_alpha_value(ALPHA_STAR, x, 0.5) <= r {
            continue;
        }
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..80 {
            let m = 0.5 * (lo + hi);
            if psi_alpha_value(ALPHA_STAR, x, m) > r {
                hi = m;
            } else {
                lo = m;
            }
        }
        let q = [x, 0.5 * (lo + hi)];
        let (a, b) = (eval_super_stream(&t, p), eval_super_stream(&t, q));
        assert!((a - b).abs() < 1e-9 * a.max(1e-12), "{a} {b}");
    }
}

#[test]
fn super_stream_vanishes_on_the_boundary() {
    let t = table();
    for s in [0.0, 0.3, 0.77, 1.0] {
        assert_eq!(eval_super_stream(&t, [s, 0.0]), 0.0);
        assert_eq!(eval_super_stream(&t, [1.0, s]), 0.0);
    }
}

#[test]
fn super_stream_increases_with_psi() {
    let t = table();
    let mut prev = 0.0;
    for i in 1..=2000 {
        let r = i as f64 / 2000.0;
        let v = t.cumulative(r);
        assert!(v > prev);
        prev = v;
    }
}

#[test]
fn super_stream_chain_rule() {
    let t = table();
    let stream = SuperStream::new(
        StreamSpec::new(ALPHA_STAR, StreamVariant::WholeSquare, 1.0).unwrap(),
        t,
        false,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-6;
    for _ in 0..200 {
        let [x, y] = interior(&mut rng, 0.02);
        let g = stream.gradient([x, y]).unwrap();
        let fx =
            (stream.value([x + h, y]).unwrap() - stream.value([x - h, y]).unwrap()) / (2.0 * h);
        let fy =
            (stream.value([x, y + h]).unwrap() - stream.value([x, y - h]).unwrap()) / (2.0 * h);
        let scale = g[0].hypot(g[1]).max(1e-3);
        assert!(
            (fx - g[0]).abs() < 1e-4 * scale && (fy - g[1]).abs() < 1e-4 * scale,
            "{fx} {fy} vs {g:?}"
        );
    }
}

#[test]
fn super_stream_orbits_have_period_one() {
    let t = table();
    let stream = SuperStream::new(
        StreamSpec::new(ALPHA_STAR, StreamVariant::WholeSquare, 1.0).unwrap(),
        t,
        false,
    )
    .unwrap();
    for i in 1..=9 {
        let r = i as f64 / 10.0;
        let start = bottom_of_level(ALPHA_STAR, r);
        let period = orbit_return_time(|p| stream.velocity(p).unwrap(), start, 10.0).unwrap();
        assert!((period - 1.0).abs() < 1e-3, "r {r}: {period}");
    }
}

#[test]
fn derivative_envelope_on_a_grid() {
    // sup |D^k ψ_α| / (sin πx + sin πy)^{2-α-k} over interior cell centres; it must not grow
    // under refinement.
    let fitted = |n: usize, a: f64| -> [f64; 3] {
        let mut c = [0.0f64; 3];
        for i in 0..n {
            for j in 0..n {
                let (x, y) = ((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
                let jet = psi_alpha(a, x, y);
                let w = (std::f64::consts::PI * x).sin() + (std::f64::consts::PI * y).sin();
                let d = [
                    jet.value.abs(),
                    jet.grad[0].hypot(jet.grad[1]),
                    jet.hess.iter().flatten().map(|v| v * v).sum::<f64>().sqrt(),
                ];
                for k in 0..3 {
                    c[k] = c[k].max(d[k] / w.powf(2.0 - a - k as f64));
                }
            }
        }
        c
    };
    for a in [0.3, ALPHA_STAR] {
        let coarse = fitted(256, a);
        let fine = fitted(512, a);
        for k in 0..3 {
            assert!(
                fine[k].is_finite() && fine[k] <= 1.05 * coarse[k],
                "alpha {a} k {k}: {coarse:?} {fine:?}"
            );
        }
    }
}

#[test]
fn gradient_scales_like_root_distance_to_max() {
    for a in [0.3, ALPHA_STAR] {
        let mut ratios = Vec::new();
        for r in [0.99, 0.999, 0.9999] {
            let area = superlevel_area(a, r).unwrap();
            let p = bottom_of_level(a, r);
            let g = psi_alpha(a, p[0], p[1]).grad;
            ratios.push(g[0].hypot(g[1]) / (1.0 - r).sqrt());
            // The level curve's length is comparable to √(1 - r) as well.
            assert!(area > 0.0);
        }
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(hi / lo < 1.01, "{ratios:?}");
    }
}

fn protocols() -> Vec<VelocityProtocol> {
    let t = table();
    vec![
        VelocityProtocol::box_2d(t.clone()).unwrap(),
        VelocityProtocol::box_rotated(t.clone()).unwrap(),
        VelocityProtocol::torus_2d(t).unwrap(),
    ]
}

/// Distance from the lines `{x_i = j/4}` bounding every stream patch.
fn patch_margin(x: &[f64]) -> f64 {
    x.iter()
        .map(|&v| (4.0 * v - (4.0 * v).round()).abs() / 4.0)
        .fold(f64::MAX, f64::min)
}

#[test]
fn protocol_fields_are_divergence_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-5;
    for p in protocols() {
        for k in 0..p.schedule.len() {
            let mut checked = 0;
            while checked < 1000 {
                let x = interior(&mut rng, 0.0);
                if patch_margin(&x) < 0.02 {
                    continue;
                }
                let mut u = [[0.0; 2]; 4];
                let probes = [
                    [x[0] + h, x[1]],
                    [x[0] - h, x[1]],
                    [x[0], x[1] + h],
                    [x[0], x[1] - h],
                ];
                for (q, out) in probes.iter().zip(u.iter_mut()) {
                    p.eval_segment(k, q, out).unwrap();
                }
                let div = (u[0][0] - u[1][0] + u[2][1] - u[3][1]) / (2.0 * h);
                assert!(div.abs() <= 1e-6, "segment {k} at {x:?}: {div}");
                checked += 1;
            }
        }
    }
}

#[test]
fn protocol_speed_is_bounded() {
    let n = 512;
    for p in protocols() {
        for k in 0..p.schedule.len() {
            let mut sup = 0.0f64;
            let mut u = [0.0; 2];
            for i in 0..n {
                for j in 0..n {
                    let x = [(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64];
                    p.eval_segment(k, &x, &mut u).unwrap();
                    sup = sup.max(u[0].hypot(u[1]));
                }
            }
            assert!(sup.is_finite() && sup < 10.0, "segment {k}: {sup}");
        }
    }
}

#[test]
fn constant_segment_is_exact() {
    let p = VelocityProtocol::torus_2d(table()).unwrap();
    assert!(p.orientation_flip);
    for t in [0.0, 0.25, 0.49, 3.1] {
        assert_eq!(velocity_at(&p, &[0.3, 0.9], t).unwrap(), vec![0.5, 0.5]);
    }
}

#[test]
fn schedules_partition_the_period() {
    let t = table();
    for d in 2..=4 {
        for p in [
            VelocityProtocol::box_d(d, t.clone()).unwrap(),
            VelocityProtocol::torus_d(d, t.clone()).unwrap(),
        ] {
            assert_eq!(p.period, (d - 1) as f64);
            assert_eq!(p.schedule[0].start, 0.0);
            assert!(p.schedule.windows(2).all(|w| w[0].end == w[1].start));
        }
    }
    let bad = vec![
        Segment {
            start: 0.0,
            end: 0.5,
            field: FieldDescriptor::W,
        },
        Segment {
            start: 0.6,
            end: 1.0,
            field: FieldDescriptor::MinusV,
        },
    ];
    assert!(VelocityProtocol::new(bad, Domain::Box, 2, false, t).is_err());
}

#[test]
fn embedded_field_acts_on_one_plane() {
    let t = table();
    let p = VelocityProtocol::box_d(3, t.clone()).unwrap();
    let planar = VelocityProtocol::box_2d(t).unwrap();
    let x = [0.3, 0.8, 0.6];
    let u = velocity_at(&p, &x, 1.2).unwrap();
    let v = velocity_at(&planar, &[0.8, 0.6], 0.2).unwrap();
    assert_eq!(u, vec![0.0, v[0], v[1]]);
}

#[test]
fn cut_points_are_rejected() {
    let p = VelocityProtocol::box_2d(table()).unwrap();
    assert!(matches!(
        velocity_at(&p, &[0.5, 0.3], 0.1),
        Err(StreamError::OnCut { .. })
    ));
    assert!(velocity_at(&p, &[0.5, 0.3], 0.7).is_ok());
}

#[test]
fn protocol_descriptors_serialize() {
    let p = VelocityProtocol::torus_d(3, table()).unwrap();
    let json = serde_json::to_string(&p.schedule).unwrap();
    let back: Vec<Segment> = serde_json::from_str(&json).unwrap();
    assert_eq!(back, p.schedule);
}

proptest! {
    #[test]
    fn velocity_is_tangent_to_level_sets(x in 0.01f64..0.99, y in 0.01f64..0.99) {
        let stream = SuperStream::new(StreamSpec::new(ALPHA_STAR, StreamVariant::WholeSquare, 0.5).unwrap(), table(), false).unwrap();
        let g = psi_alpha(ALPHA_STAR, x, y).grad;
        let u = stream.velocity([x, y]).unwrap();
        prop_assert!((u[0] * g[0] + u[1] * g[1]).abs() < 1e-12 * (1.0 + g[0].hypot(g[1]).powi(2)));
    }
}
