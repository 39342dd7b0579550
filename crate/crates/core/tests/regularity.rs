use std::sync::{Arc, OnceLock};

use mixlab::regularity::*;
use mixlab::stream::*;
use proptest::prelude::*;

fn table() -> Arc<PeriodTable> {
    static T: OnceLock<Arc<PeriodTable>> = OnceLock::new();
    T.get_or_init(|| Arc::new(PeriodTable::build(ALPHA_STAR, DEFAULT_TABLE_SAMPLES).unwrap()))
        .clone()
}

fn quad() -> QuadSpec {
    QuadSpec::default()
}

fn frob(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + 2.0 * v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[test]
fn constants_have_no_fractional_derivative() {
    for x in [[0.5, 0.5], [0.1, 0.8], [0.003, 0.4]] {
        assert_eq!(
            lambda_gamma_scalar(&|_| 2.5, 0.5, x, &Rect::UNIT, &quad()).unwrap(),
            0.0
        );
    }
}

#[test]
fn odd_functions_vanish_at_the_centre_of_the_symmetric_square() {
    for gamma in [0.1, 0.5, 0.9] {
        let v =
            lambda_gamma_scalar(&|y| y[0], gamma, [0.0, 0.0], &Rect::SYMMETRIC, &quad()).unwrap();
        assert!(v.abs() < 1e-12, "{gamma}: {v}");
    }
}

/// `Λ^γ |· - x₀|²` at `x₀` is `-∫_Q |y - x₀|^{-γ}`, integrated here by brute force.
#[test]
fn quadratic_bowl_matches_brute_force() {
    let gamma = 0.5;
    for (x0, tol) in [
        ([0.5, 0.5], 1e-4),
        ([0.2, 0.7], 1e-4),
        ([0.03, 0.5], 5e-4),
        ([0.01, 0.02], 2e-3),
    ] {
        let f = |y: [f64; 2]| (y[0] - x0[0]).powi(2) + (y[1] - x0[1]).powi(2);
        let q = lambda_gamma_scalar(&f, gamma, x0, &Rect::UNIT, &quad()).unwrap();
        let m = 1500;
        let h = 1.0 / m as f64;
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += f([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]).powf(-gamma / 2.0);
            }
        }
        let brute = -s * h * h;
        assert!(((q - brute) / brute).abs() < tol, "{x0:?}: {q} vs {brute}");
    }
}

#[test]
fn gamma_must_lie_in_the_open_unit_interval() {
    for g in [0.0, 1.0, -0.2] {
        assert!(matches!(
            lambda_gamma_scalar(&|y| y[0], g, [0.5, 0.5], &Rect::UNIT, &quad()),
            Err(RegularityError::GammaOutOfRange(_))
        ));
    }
    assert!(matches!(
        lambda_gamma_scalar(&|y| y[0], 0.5, [0.0, 0.5], &Rect::UNIT, &quad()),
        Err(RegularityError::NotInterior(_))
    ));
}

/// A jump `10⁻⁵` from `x` sits inside the disc the default rule drops but outside the one the
/// refined rule drops.
#[test]
fn unresolved_jump_is_flagged() {
    let f = |y: [f64; 2]| if y[0] > 0.3 + 1e-5 { 1.0 } else { 0.0 };
    let r = lambda_gamma_scalar(&f, 0.5, [0.3, 0.6], &Rect::UNIT, &quad());
    assert!(
        matches!(r, Err(RegularityError::QuadratureUnstable { .. })),
        "{r:?}"
    );
    let far = |y: [f64; 2]| if y[0] > 0.3 + 1e-3 { 1.0 } else { 0.0 };
    lambda_gamma_scalar(&far, 0.5, [0.3, 0.6], &Rect::UNIT, &quad()).unwrap();
}

#[test]
fn fractional_derivative_of_the_hessian_is_quadrature_stable_near_the_boundary() {
    let h = super_hessian(table()).unwrap();
    for k in [2, 5, 8, 11] {
        let s = 2f64.powi(-k);
        for x in [[s, 0.5], [s, s], [s, 0.3]] {
            lambda_gamma(&h, 0.5, x, &Rect::UNIT, &quad()).unwrap();
        }
    }
}

/// `|Λ^γ D²ψ^α★| |sin πx sin πy|^{β+γ+ε}` stays bounded towards the edges and the corner
/// with `β = α★/2`, `ε = 0.05`; leaving out `β` makes it grow.
#[test]
fn fractional_derivative_obeys_the_sine_envelope() {
    let h = super_hessian(table()).unwrap();
    let gamma = 0.5;
    let beta = singular_exponent(ALPHA_STAR);
    let weight = |x: [f64; 2], e: f64| (sin_pi(x[0]) * sin_pi(x[1])).abs().powf(e);
    let scales: Vec<f64> = (2..=14).step_by(2).map(|k| 2f64.powi(-k)).collect();
    for line in [|s: f64| [s, 0.5], |s: f64| [s, s], |s: f64| [s, 0.3]] {
        let sizes: Vec<f64> = scales
            .iter()
            .map(|&s| frob(lambda_gamma(&h, gamma, line(s), &Rect::UNIT, &quad()).unwrap()))
            .collect();
        let ratio = |e: f64| -> Vec<f64> {
            scales
                .iter()
                .zip(&sizes)
                .map(|(&s, v)| v * weight(line(s), e))
                .collect()
        };
        let fitted = ratio(beta + gamma + 0.05);
        let k = fitted[..3].iter().cloned().fold(0.0, f64::max);
        assert!(fitted[3..].iter().all(|&r| r <= k), "{fitted:?}");
        let misfit = ratio(gamma - 0.2);
        assert!(
            misfit[6] > 3.0 * misfit[..3].iter().cloned().fold(0.0, f64::max),
            "{misfit:?}"
        );
    }
}

fn bump(y: [f64; 2]) -> [f64; 3] {
    [
        (3.0 * y[0]).sin() * (2.0 * y[1]).cos(),
        y[0] * y[1],
        (y[0] - 0.3).powi(2),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lambda_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, x in 0.05f64..0.95, y in 0.05f64..0.95) {
        let spec = quad().unchecked();
        let h = super_hessian(table()).unwrap();
        let f = |p: [f64; 2]| h(p);
        let combo = |p: [f64; 2]| {
            let (u, v) = (f(p), bump(p));
            [a * u[0] + b * v[0], a * u[1] + b * v[1], a * u[2] + b * v[2]]
        };
        let lf = lambda_gamma(&f, 0.4, [x, y], &Rect::UNIT, &spec).unwrap();
        let lg = lambda_gamma(&bump, 0.4, [x, y], &Rect::UNIT, &spec).unwrap();
        let lc = lambda_gamma(&combo, 0.4, [x, y], &Rect::UNIT, &spec).unwrap();
        for i in 0..3 {
            let want = a * lf[i] + b * lg[i];
            prop_assert!((lc[i] - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
    }
}

#[test]
fn gamma_zero_probe_is_the_plain_norm() {
    let r = wsp_probe(&table(), 0.0, 2.0, &[4, 5, 6], &quad()).unwrap();
    let h = super_hessian(table()).unwrap();
    for (k, &n) in r.resolutions.iter().enumerate() {
        let side = 1usize << n;
        let cell = 1.0 / side as f64;
        let margin = 4.0 * cell;
        let mut s = 0.0;
        for i in 0..side {
            for j in 0..side {
                let x = [(i as f64 + 0.5) * cell, (j as f64 + 0.5) * cell];
                if x.iter().all(|&c| c >= margin && 1.0 - c >= margin) {
                    s += frob(h(x)).powi(2) * cell * cell;
                }
            }
        }
        assert!(
            (r.estimates[k] - s.sqrt()).abs() < 1e-9 * s.sqrt(),
            "n = {n}"
        );
        assert_eq!(r.margins[k], margin);
    }
}

#[test]
fn probe_reports_share_one_field_evaluation() {
    let res = [4, 5, 6];
    let many = wsp_probe_multi(&table(), 0.5, &[1.05, 1.3], &res, &quad()).unwrap();
    let one = wsp_probe(&table(), 0.5, 1.3, &res, &quad()).unwrap();
    assert_eq!(many[1], one);
    assert!((one.threshold - 1.0 / (ALPHA_STAR / 2.0 + 0.5)).abs() < 1e-12);
    assert_eq!(one.ratios.len(), 2);
}

#[test]
fn probe_rejects_bad_inputs() {
    let t = table();
    assert!(matches!(
        wsp_probe(&t, 0.5, 1.05, &[5, 6], &quad()),
        Err(RegularityError::Resolutions(_))
    ));
    assert!(matches!(
        wsp_probe(&t, 0.5, 1.05, &[5, 7, 6], &quad()),
        Err(RegularityError::Resolutions(_))
    ));
    assert!(matches!(
        wsp_probe(&t, 1.0, 1.05, &[4, 5, 6], &quad()),
        Err(RegularityError::GammaOutOfRange(_))
    ));
    assert!(matches!(
        wsp_probe(&t, 0.5, 0.9, &[4, 5, 6], &quad()),
        Err(RegularityError::Parameter(_))
    ));
}

/// Once a pair diverges, every pair with larger `γ` and `p` diverges too, for both rules.
#[test]
fn verdicts_are_monotone_over_a_battery() {
    let res = [5, 6, 7];
    let ps = [1.05, 1.3, 2.0, 3.0];
    let mut runs = Vec::new();
    for gamma in [0.0, 0.25, 0.5] {
        for r in wsp_probe_multi(&table(), gamma, &ps, &res, &quad()).unwrap() {
            runs.push(r);
        }
    }
    for a in &runs {
        for b in &runs {
            if b.gamma >= a.gamma && b.p >= a.p {
                if a.verdict == Verdict::Diverging {
                    assert_eq!(
                        b.verdict,
                        Verdict::Diverging,
                        "({}, {}) vs ({}, {})",
                        a.gamma,
                        a.p,
                        b.gamma,
                        b.p
                    );
                }
                if a.tail_verdict == Verdict::Diverging {
                    assert_eq!(
                        b.tail_verdict,
                        Verdict::Diverging,
                        "({}, {}) vs ({}, {})",
                        a.gamma,
                        a.p,
                        b.gamma,
                        b.p
                    );
                }
            }
        }
    }
    let mut csv = Vec::new();
    write_summary_csv(&mut csv, &runs).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), runs.len() + 1);
    assert!(text.starts_with("alpha,gamma,p,verdict,threshold"));
}

#[test]
fn log_concavity_holds_across_alpha() {
    for alpha in [0.0, 0.5, ALPHA_STAR, 0.999] {
        let r = log_concavity_check(alpha, 9).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.max_trace < 0.0 && r.min_det >= 0.0 && r.max_chain_excess <= HESSIAN_TOL);
        assert_eq!(r.points, 512 * 512);
    }
}

#[test]
fn log_concavity_at_alpha_zero_is_separable() {
    let r = log_concavity_check(0.0, 6).unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    // The largest trace sits at the centre cell: -2π²/sin²(π(½ ± 1/128)).
    let c = (std::f64::consts::PI * (0.5 - 1.0 / 128.0)).sin();
    assert!(
        (r.max_trace + 2.0 * pi2 / (c * c)).abs() < 1e-9,
        "{}",
        r.max_trace
    );
    assert!(r.min_det > 0.0);
}

#[test]
fn log_concavity_in_single_precision() {
    let r = log_concavity_check(ALPHA_STAR as f32, 6).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn log_concavity_rejects_alpha_outside_the_unit_interval() {
    assert!(log_concavity_check(1.2f64, 4).is_err());
}

#[test]
fn derivative_envelopes_are_stable() {
    for alpha in [0.5, ALPHA_STAR] {
        for k in 0..=2u8 {
            let r = envelope_check(alpha, k, 8, 0.0).unwrap();
            assert!(r.stable, "{r:?}");
            assert!(r.constant.is_finite() && r.constant > 0.0);
        }
    }
}

#[test]
fn misfit_envelope_blows_up() {
    for k in 0..=2u8 {
        let r = envelope_check(0.5, k, 8, 0.5).unwrap();
        assert!(!r.stable && r.sup[1] > 1.2 * r.sup[0], "{r:?}");
    }
}

#[test]
fn envelope_constant_for_the_value_is_the_analytic_sup() {
    // ψ_α / (s + t)^{2-α} = 2^α st/(s+t)² ≤ 2^α/4, attained on the diagonal.
    let r = envelope_check(0.5f64, 0, 6, 0.0).unwrap();
    assert!(
        (r.constant - 2f64.powf(0.5) / 4.0).abs() < 1e-12,
        "{}",
        r.constant
    );
}
