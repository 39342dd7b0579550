//! Homogeneous Sobolev norms on the torus from the discrete Fourier transform.
//!
//! Convention: `c_k = 2^{-dn} Σ_j f_j e^{-2πi k·x_j}` with signed frequencies
//! `k ∈ (-2^{n-1}, 2^{n-1}]^d`, and `‖f‖²_{Ḣ^{-s}} = Σ_{k≠0} (2π|k|)^{-2s} |c_k|²`.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::MetricsError;
use crate::field::{Domain, ScalarGrid};
use crate::Real;

pub const MEAN_ZERO_TOL: f64 = 1e-10;

/// In-place forward FFT along every axis of a `side^dim` array, axis 0 fastest.
fn fft_nd(data: &mut [Complex<f64>], dim: usize, side: usize) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(side);
    let mut line = vec![Complex::new(0.0, 0.0); side];
    for axis in 0..dim {
        let stride = side.pow(axis as u32);
        let outer = data.len() / side;
        for o in 0..outer {
            // o enumerates every index except the current axis.
            let lo = o % stride;
            let hi = o / stride;
            let base = hi * stride * side + lo;
            for (i, z) in line.iter_mut().enumerate() {
                *z = data[base + i * stride];
            }
            fft.process(&mut line);
            for (i, z) in line.iter().enumerate() {
                data[base + i * stride] = *z;
            }
        }
    }
}

fn signed(i: usize, side: usize) -> f64 {
    if i > side / 2 {
        i as f64 - side as f64
    } else {
        i as f64
    }
}

/// `‖f‖_{Ḣ^{-s}}`; `s` may be negative, giving a positive-order seminorm.
pub fn sobolev_norm_torus<F: Real>(grid: &ScalarGrid<F>, s: F) -> Result<F, MetricsError> {
    if grid.domain() != Domain::Torus {
        return Err(MetricsError::NotTorus);
    }
    let mean = grid.mean().to_f64().unwrap();
    if mean.abs() > MEAN_ZERO_TOL {
        return Err(MetricsError::NotMeanZero(mean));
    }
    let s = s.to_f64().unwrap();
    let side = grid.side();
    let dim = grid.dim();
    let mut data: Vec<Complex<f64>> = grid
        .values()
        .iter()
        .map(|v| Complex::new(v.to_f64().unwrap(), 0.0))
        .collect();
    fft_nd(&mut data, dim, side);
    let norm = 1.0 / data.len() as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut total = 0.0;
    for (flat, z) in data.iter().enumerate() {
        if flat == 0 {
            continue;
        }
        let mut r = flat;
        let mut k2 = 0.0;
        for _ in 0..dim {
            let k = signed(r % side, side);
            r /= side;
            k2 += k * k;
        }
        let weight = (two_pi * k2.sqrt()).powf(-2.0 * s);
        total += weight * (z * norm).norm_sqr();
    }
    Ok(F::lit(total.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_has_one_coefficient_pair() {
        let g = ScalarGrid::<f64>::from_fn(2, 4, Domain::Torus, |i| {
            (2.0 * std::f64::consts::PI * (i[1] as f64 + 0.5) / 16.0 * 3.0).cos()
        });
        let s0 = sobolev_norm_torus(&g, 0.0).unwrap();
        assert!((s0 - g.lp_norm(2.0)).abs() < 1e-12);
        let s1 = sobolev_norm_torus(&g, 1.0).unwrap();
        assert!((s1 - s0 / (2.0 * std::f64::consts::PI * 3.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_box_and_nonzero_mean() {
        let g = ScalarGrid::<f64>::from_fn(2, 2, Domain::Box, |_| 0.0);
        assert!(matches!(
            sobolev_norm_torus(&g, 0.5),
            Err(MetricsError::NotTorus)
        ));
        let g = ScalarGrid::<f64>::from_fn(2, 2, Domain::Torus, |_| 1.0);
        assert!(matches!(
            sobolev_norm_torus(&g, 0.5),
            Err(MetricsError::NotMeanZero(_))
        ));
    }
}
