use mixlab::counterexample::{
    construct_bad_set, demonstrate_no_rate, feasibility, BadSetSpec, CounterexampleError,
    RateSequence, Subsequence,
};
use mixlab::dyadic::{baker_t, build_t_d, build_t_prime, DyadicRational, PiecewiseDyadicAffineMap};

/// `λ_n = e^{-3n}` at `n_j = 1, 2`: slow enough decay to keep the `T_3` preimages wider than a cell.
fn cubic_spec(n: u32) -> BadSetSpec {
    BadSetSpec::new(
        RateSequence::Exponential { decay: 3.0 },
        Subsequence::Offset(0),
        2,
        3,
        n,
    )
}

fn pow2_spec(offset: usize, terms: usize, dim: usize, n: u32) -> BadSetSpec {
    BadSetSpec::new(
        RateSequence::Pow2,
        Subsequence::Offset(offset),
        terms,
        dim,
        n,
    )
}

#[test]
fn exponential_rates_from_the_third_term_are_feasible() {
    let spec = BadSetSpec::new(
        RateSequence::Exponential { decay: 1.0 },
        Subsequence::Offset(2),
        3,
        2,
        8,
    );
    let f = feasibility(&spec).unwrap();
    let e = std::f64::consts::E;
    let oracle = std::f64::consts::PI * e.powi(-3) / (1.0 - 1.0 / e);
    assert!((oracle - 0.2474).abs() < 1e-4);
    assert!(f.bound >= oracle && f.bound - oracle < 1e-14);
    assert!(f.feasible && !f.exact);
}

#[test]
fn constant_rates_are_infeasible() {
    let spec = BadSetSpec::new(RateSequence::Constant(0.5), Subsequence::Offset(0), 2, 2, 6);
    assert!(!feasibility(&spec).unwrap().feasible);
    assert!(matches!(
        construct_bad_set::<f64>(&spec, &baker_t()),
        Err(CounterexampleError::Infeasible { .. })
    ));
}

#[test]
fn feasibility_boundary_for_dyadic_rates() {
    // π Σ_{j≥1} 2^{-(j+o)} = π 2^{-o}: o = 2 gives π/4, o = 3 gives π/8.
    let f2 = feasibility(&pow2_spec(2, 1, 2, 6)).unwrap();
    let f3 = feasibility(&pow2_spec(3, 1, 2, 6)).unwrap();
    assert!(f2.exact && f3.exact);
    assert_eq!((f2.sum, f3.sum), (0.25, 0.125));
    assert!(!f2.feasible && f3.feasible);
    // 4π/3 · 2^{-4} ≈ 0.26 in three dimensions.
    assert!(feasibility(&pow2_spec(4, 1, 3, 5)).unwrap().feasible);
    assert!(!feasibility(&pow2_spec(1, 1, 3, 5)).unwrap().feasible);
}

#[test]
fn bad_set_is_a_balanced_sign_field() {
    let n = 9;
    let set = construct_bad_set::<f64>(&pow2_spec(3, 3, 2, n), &baker_t()).unwrap();
    assert!(set.field.values().iter().all(|&v| v == 1.0 || v == -1.0));
    assert!(set.field.mean().abs() <= (-2.0 * n as f64).exp2());
    let plus = set.field.values().iter().filter(|&&v| v > 0.0).count();
    assert_eq!(plus, set.designated + set.padding);
    assert_eq!(plus, set.field.len() / 2);
}

#[test]
fn designated_cells_have_the_ball_measure() {
    let n = 10;
    let set = construct_bad_set::<f64>(&pow2_spec(3, 3, 2, n), &baker_t()).unwrap();
    let target = std::f64::consts::PI * (1.0 / 16.0 + 1.0 / 32.0 + 1.0 / 64.0);
    let measure = set.designated as f64 * (-2.0 * n as f64).exp2();
    assert!(
        measure >= target && measure < 1.15 * target,
        "{measure} vs {target}"
    );
}

/// Every preimage `map^{-n_j}(y)` of a point `y` in a designated ball lies in `A`, for `y`
/// at least one forward-stretched cell `2^{n_j} h` inside the ball.
fn preimages_land_in_a(map: &PiecewiseDyadicAffineMap, spec: &BadSetSpec) {
    let set = construct_bad_set::<f64>(spec, map).unwrap();
    let inverse = map.inverse();
    let side = set.field.side();
    let center = spec.center();
    let dim = spec.dim;
    for (nj, lambda) in spec.balls().unwrap() {
        let radius = lambda.powf(1.0 / dim as f64);
        let m = 37u32;
        let mut checked = 0;
        for k in 0..m.pow(dim as u32) {
            let mut rest = k;
            let mut y = Vec::with_capacity(dim);
            for a in 0..dim {
                let u = (rest % m) as f64 + 0.5 + 0.1 * a as f64;
                rest /= m;
                y.push(center[a] - radius + 2.0 * radius * u / m as f64);
            }
            let dist: f64 = y
                .iter()
                .zip(&center)
                .map(|(p, c)| (p - c).powi(2))
                .sum::<f64>()
                .sqrt();
            if dist >= radius - (nj as f64).exp2() / side as f64 {
                continue;
            }
            let mut p: Vec<DyadicRational> = y
                .iter()
                .map(|&v| DyadicRational::from_f64(v).unwrap())
                .collect();
            let mut on_cut = false;
            for _ in 0..nj {
                match inverse.apply(&p) {
                    Ok(q) => p = q,
                    Err(_) => {
                        on_cut = true;
                        break;
                    }
                }
            }
            if on_cut {
                continue;
            }
            let idx: Vec<usize> = p
                .iter()
                .map(|v| (v.to_f64() * side as f64) as usize)
                .collect();
            assert_eq!(
                set.field.get(&idx),
                1.0,
                "preimage of {y:?} after {nj} steps"
            );
            checked += 1;
        }
        assert!(checked > 100);
    }
}

#[test]
fn ball_preimages_are_inside_a_for_t() {
    preimages_land_in_a(&baker_t(), &pow2_spec(3, 3, 2, 10));
}

#[test]
fn ball_preimages_are_inside_a_for_t_prime() {
    preimages_land_in_a(&build_t_prime(), &pow2_spec(3, 3, 2, 10));
}

#[test]
fn ball_preimages_are_inside_a_for_t_d() {
    preimages_land_in_a(&build_t_d(3), &cubic_spec(6));
}

#[test]
fn dyadic_rates_are_not_met_under_t() {
    let report = demonstrate_no_rate(&pow2_spec(3, 3, 2, 10), &baker_t(), 3).unwrap();
    assert_eq!(report.rows.len(), 3);
    for r in &report.rows {
        assert!(r.ball_average >= 0.95, "{r:?}");
        assert!(r.geometric_scale > r.lambda, "{r:?}");
        assert!(r.mix_norm >= r.mix_norm_floor, "{r:?}");
    }
    assert_eq!(report.late_step, 26);
    assert!(report.late_mix_norm < report.rows[2].mix_norm);
    assert!(report.pass);
    let json = serde_json::to_value(&report).unwrap();
    for key in [
        "n_j",
        "lambda",
        "ball_average",
        "geometric_scale",
        "mix_norm",
    ] {
        assert!(json["rows"][0].get(key).is_some(), "{key}");
    }
}

#[test]
fn demonstration_runs_unchanged_on_the_torus_map() {
    let report = demonstrate_no_rate(&pow2_spec(3, 3, 2, 10), &build_t_prime(), 3).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn demonstration_runs_unchanged_in_three_dimensions() {
    let report = demonstrate_no_rate(&cubic_spec(5), &build_t_d(3), 2).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn preimages_thinner_than_a_cell_overfill_the_grid() {
    // n_j ≥ 5 is forced in three dimensions by dyadic rates; T_3^{-5} squeezes the balls
    // below the 1/32 cells, so every touched cell joins A.
    let err = construct_bad_set::<f64>(&pow2_spec(4, 2, 3, 5), &build_t_d(3)).unwrap_err();
    assert!(matches!(err, CounterexampleError::Overfull { .. }), "{err}");
}

#[test]
fn balls_under_four_cells_are_rejected() {
    // λ = 2^{-5} gives radius 0.18, under 4 cells of 1/16.
    let err = demonstrate_no_rate(&pow2_spec(3, 3, 2, 4), &baker_t(), 3).unwrap_err();
    assert!(
        matches!(err, CounterexampleError::ResolutionTooCoarse { j: 2, .. }),
        "{err}"
    );
}

#[test]
fn bad_parameters_are_rejected() {
    let mut spec = pow2_spec(3, 3, 2, 8);
    spec.samples_per_axis = 2;
    assert!(matches!(
        construct_bad_set::<f64>(&spec, &baker_t()),
        Err(CounterexampleError::Parameter(_))
    ));
    assert!(demonstrate_no_rate(&pow2_spec(3, 3, 2, 8), &baker_t(), 4).is_err());
    assert!(construct_bad_set::<f64>(&pow2_spec(3, 3, 3, 5), &baker_t()).is_err());
}

#[test]
fn single_precision_field() {
    let set = construct_bad_set::<f32>(&pow2_spec(3, 2, 2, 8), &baker_t()).unwrap();
    assert_eq!(set.field.mean(), 0.0);
}
