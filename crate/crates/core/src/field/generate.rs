//! Initial-data generators; every generated field is mean-zero with `‖f‖_∞ ≤ amplitude`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{Domain, FieldError, ScalarGrid};
use crate::dyadic::{merge_boxes, DyadicBox, DyadicInterval};
use crate::Real;

pub const DEFAULT_SPECTRAL_CUTOFF: u32 = 32;
/// Margin added to the spectral decay exponent so the `H^σ` sum converges.
pub const SPECTRAL_EPS: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialKind {
    /// `+1` on `x_1 < 1/2`, `-1` on `x_1 > 1/2`.
    HalfSplit,
    /// `±1` on the cubes of `G_k`, alternating.
    Checkerboard { k: u32 },
    /// Balanced indicator of a union of dyadic boxes.
    DyadicSet { boxes: Vec<DyadicBox> },
    /// Random-sign Fourier series with `|c_k| ∝ |k|^{-σ-d/2-ε}` for `0 < |k|_∞ ≤ cutoff`.
    Spectral {
        sigma: f64,
        seed: u64,
        #[serde(default)]
        cutoff: Option<u32>,
    },
    /// `sin(2π k·x)`.
    TrigMode { k: Vec<i64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialDataSpec {
    #[serde(flatten)]
    pub kind: InitialKind,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl InitialDataSpec {
    pub fn new(kind: InitialKind) -> Self {
        Self {
            kind,
            amplitude: 1.0,
        }
    }

    pub fn with_amplitude(mut self, a: f64) -> Self {
        self.amplitude = a;
        self
    }
}

/// Samples `spec` as exact (or, for Fourier data, analytically integrated) cell averages.
pub fn generate<F: Real>(
    spec: &InitialDataSpec,
    dim: usize,
    n: u32,
    domain: Domain,
) -> Result<ScalarGrid<F>, FieldError> {
    if !(2..=3).contains(&dim) {
        return Err(FieldError::Dimension(dim));
    }
    let amp = F::lit(spec.amplitude);
    let side = 1usize << n;
    match &spec.kind {
        InitialKind::HalfSplit => {
            if n < 1 {
                return Err(FieldError::ResolutionTooCoarse { needed: 1, n });
            }
            Ok(ScalarGrid::from_fn(dim, n, domain, |idx| {
                if idx[0] < side / 2 {
                    amp
                } else {
                    -amp
                }
            }))
        }
        InitialKind::Checkerboard { k } => {
            if *k > n {
                return Err(FieldError::ResolutionTooCoarse { needed: *k, n });
            }
            let shift = n - k;
            Ok(ScalarGrid::from_fn(dim, n, domain, |idx| {
                let parity: usize = idx.iter().map(|&i| i >> shift).sum();
                if parity % 2 == 0 {
                    amp
                } else {
                    -amp
                }
            }))
        }
        InitialKind::DyadicSet { boxes } => dyadic_set(boxes, dim, n, domain, amp),
        InitialKind::Spectral {
            sigma,
            seed,
            cutoff,
        } => {
            let k = cutoff.unwrap_or(DEFAULT_SPECTRAL_CUTOFF);
            if k == 0 || *sigma < 0.0 {
                return Err(FieldError::Parameter(
                    "spectral data needs cutoff ≥ 1 and σ ≥ 0".into(),
                ));
            }
            spectral(*sigma, *seed, k, dim, n, domain, spec.amplitude)
        }
        InitialKind::TrigMode { k } => {
            if k.len() != dim || k.iter().all(|&c| c == 0) {
                return Err(FieldError::Parameter(format!(
                    "trig mode {k:?} must be a nonzero {dim}-vector"
                )));
            }
            let h = (-(n as f64)).exp2();
            let factors: Vec<Vec<Complex<f64>>> =
                k.iter().map(|&m| mode_cell_averages(m, side, h)).collect();
            let g: ScalarGrid<F> = ScalarGrid::from_fn(dim, n, domain, |idx| {
                let z = idx
                    .iter()
                    .enumerate()
                    .fold(Complex::new(1.0, 0.0), |acc, (a, &i)| acc * factors[a][i]);
                F::lit(z.im * spec.amplitude)
            });
            Ok(g.mean_zero_normalize())
        }
    }
}

/// Cell averages of `e^{2πimx}` over the `side` cells of width `h`.
fn mode_cell_averages(m: i64, side: usize, h: f64) -> Vec<Complex<f64>> {
    let z = std::f64::consts::PI * m as f64 * h;
    let sinc = if m == 0 { 1.0 } else { z.sin() / z };
    (0..side)
        .map(|i| {
            let c = (i as f64 + 0.5) * h;
            Complex::from_polar(sinc, 2.0 * std::f64::consts::PI * m as f64 * c)
        })
        .collect()
}

fn dyadic_set<F: Real>(
    boxes: &[DyadicBox],
    dim: usize,
    n: u32,
    domain: Domain,
    amp: F,
) -> Result<ScalarGrid<F>, FieldError> {
    for b in boxes {
        if b.dim() != dim {
            return Err(FieldError::Parameter(format!(
                "box of dimension {} in a {dim}-d field",
                b.dim()
            )));
        }
        if b.max_scale() > n {
            return Err(FieldError::ResolutionTooCoarse {
                needed: b.max_scale(),
                n,
            });
        }
    }
    let set = merge_boxes(boxes.to_vec());
    let measure = set.iter().map(|b| b.measure().to_f64()).sum::<f64>();
    if measure > 1.0 + 1e-12 {
        return Err(FieldError::Parameter("dyadic set boxes overlap".into()));
    }
    let denom = measure.max(1.0 - measure);
    let inside = F::lit((1.0 - measure) / denom) * amp;
    let outside = -F::lit(measure / denom) * amp;
    let grid = ScalarGrid::from_fn(dim, n, domain, |idx| {
        let cell = DyadicBox::new(
            idx.iter()
                .map(|&i| DyadicInterval::new(n, i as i128))
                .collect(),
        );
        if set.iter().any(|b| cell.within(b)) {
            inside
        } else {
            outside
        }
    });
    Ok(grid)
}

fn spectral<F: Real>(
    sigma: f64,
    seed: u64,
    cutoff: u32,
    dim: usize,
    n: u32,
    domain: Domain,
    amplitude: f64,
) -> Result<ScalarGrid<F>, FieldError> {
    let k = cutoff as i64;
    let m = (2 * k + 1) as usize;
    let side = 1usize << n;
    let h = (-(n as f64)).exp2();
    let decay = sigma + dim as f64 / 2.0 + SPECTRAL_EPS;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let total = m.pow(dim as u32);
    let mut coeffs = vec![Complex::new(0.0, 0.0); total];
    for (flat, c) in coeffs.iter_mut().enumerate() {
        let mut r = flat;
        let mut norm2 = 0.0;
        for _ in 0..dim {
            let ka = (r % m) as i64 - k;
            r /= m;
            norm2 += (ka * ka) as f64;
        }
        // Draws happen for every slot, zero mode included, so the sequence is fixed by (seed, cutoff, dim).
        let s1 = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let s2 = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        if norm2 > 0.0 {
            *c = Complex::new(s1, s2) * (norm2.sqrt().powf(-decay) / std::f64::consts::SQRT_2);
        }
    }

    let basis: Vec<Vec<Complex<f64>>> = (-k..=k)
        .map(|mode| mode_cell_averages(mode, side, h))
        .collect();
    // Contract one axis at a time: mode index -> cell index.
    let mut dims = vec![m; dim];
    let mut data = coeffs;
    for axis in 0..dim {
        let inner: usize = dims[..axis].iter().product();
        let outer: usize = dims[axis + 1..].iter().product();
        let mut next = vec![Complex::new(0.0, 0.0); inner * side * outer];
        for o in 0..outer {
            for (mi, row) in basis.iter().enumerate() {
                let src = &data[(o * m + mi) * inner..(o * m + mi + 1) * inner];
                if src.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                    continue;
                }
                for (i, e) in row.iter().enumerate() {
                    let dst = &mut next[(o * side + i) * inner..(o * side + i + 1) * inner];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s * e;
                    }
                }
            }
        }
        dims[axis] = side;
        data = next;
    }
    let raw: Vec<F> = data.iter().map(|z| F::lit(z.re)).collect();
    let g = ScalarGrid::new(dim, n, domain, raw)?.mean_zero_normalize();
    let sup = g.sup_norm();
    if sup == F::zero() {
        return Ok(g);
    }
    Ok(g.scale(F::lit(amplitude) / sup))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_split_columns() {
        let g: ScalarGrid<f64> = generate(
            &InitialDataSpec::new(InitialKind::HalfSplit),
            2,
            4,
            Domain::Box,
        )
        .unwrap();
        for j in 0..16 {
            for i in 0..16 {
                assert_eq!(g.get(&[i, j]), if i < 8 { 1.0 } else { -1.0 });
            }
        }
        assert_eq!(g.mean(), 0.0);
    }

    #[test]
    fn checkerboard_is_balanced() {
        let g: ScalarGrid<f64> = generate(
            &InitialDataSpec::new(InitialKind::Checkerboard { k: 1 }),
            2,
            3,
            Domain::Box,
        )
        .unwrap();
        assert_eq!(g.mean(), 0.0);
        assert_eq!(g.get(&[0, 0]), 1.0);
        assert_eq!(g.get(&[4, 0]), -1.0);
        assert!(generate::<f64>(
            &InitialDataSpec::new(InitialKind::Checkerboard { k: 5 }),
            2,
            3,
            Domain::Box
        )
        .is_err());
    }

    #[test]
    fn dyadic_set_balances_weights() {
        let boxes = vec![DyadicBox::rect(1, 0, 2, 0)];
        let g: ScalarGrid<f64> = generate(
            &InitialDataSpec::new(InitialKind::DyadicSet { boxes }),
            2,
            3,
            Domain::Box,
        )
        .unwrap();
        assert!(g.mean().abs() < 1e-15);
        assert_eq!(g.sup_norm(), 1.0);
        assert_eq!(g.get(&[0, 0]), 1.0);
        assert!((g.get(&[7, 7]) + 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_is_deterministic() {
        let spec = InitialDataSpec::new(InitialKind::Spectral {
            sigma: 1.0,
            seed: 7,
            cutoff: Some(8),
        });
        let a: ScalarGrid<f64> = generate(&spec, 2, 5, Domain::Torus).unwrap();
        let b: ScalarGrid<f64> = generate(&spec, 2, 5, Domain::Torus).unwrap();
        assert_eq!(a.values(), b.values());
        assert!((a.sup_norm() - 1.0).abs() < 1e-15);
        assert!(a.mean().abs() < 1e-15);
    }

    #[test]
    fn spec_parses_from_json() {
        let spec: InitialDataSpec =
            serde_json::from_str(r#"{"kind":"checkerboard","k":2,"amplitude":0.5}"#).unwrap();
        assert_eq!(
            spec,
            InitialDataSpec::new(InitialKind::Checkerboard { k: 2 }).with_amplitude(0.5)
        );
    }
}
