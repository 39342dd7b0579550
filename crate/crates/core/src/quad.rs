//! Cached Gauss–Legendre rules on [-1, 1].

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

fn rule(n: usize) -> Vec<(f64, f64)> {
    let q = GaussLegendre::new(NonZeroUsize::new(n).expect("positive degree"));
    let mut v: Vec<(f64, f64)> = q.iter().map(|(x, w)| (*x, *w)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

const MAX_DEGREE: usize = 64;

/// The `n`-point rule, `1 ≤ n ≤ 64`.
pub(crate) fn gl(n: usize) -> &'static [(f64, f64)] {
    static RULES: [OnceLock<Vec<(f64, f64)>>; MAX_DEGREE] = [const { OnceLock::new() }; MAX_DEGREE];
    assert!(
        (1..=MAX_DEGREE).contains(&n),
        "Gauss-Legendre degree {n} out of range"
    );
    RULES[n - 1].get_or_init(|| rule(n))
}

pub(crate) fn gl8() -> &'static [(f64, f64)] {
    gl(8)
}

pub(crate) fn gl20() -> &'static [(f64, f64)] {
    gl(20)
}

/// `∫_a^b f` with the given rule.
pub(crate) fn integrate(rule: &[(f64, f64)], a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}
