//! Exponential decay rates by least squares on `log v`.

use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Slope of `log v` per step; `-γ` for `v ~ e^{-γ t}`.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// First step kept in the fit.
    pub tau: f64,
}

/// Fits `log v = intercept + slope·t` to the points with index `≥ burn_in`.
pub fn rate_fit(series: &[(f64, f64)], burn_in: usize) -> Result<RateFit, MetricsError> {
    let pts = series.get(burn_in..).unwrap_or(&[]);
    if pts.len() < 4 {
        return Err(MetricsError::TooFewPoints(pts.len()));
    }
    if let Some(&(t, v)) = pts.iter().find(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
        return Err(MetricsError::NonPositive { t, v });
    }
    if pts.iter().all(|p| p.1 == pts[0].1) {
        return Err(MetricsError::Degenerate);
    }
    let m = pts.len() as f64;
    let tx: f64 = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ly: f64 = pts.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(t, v) in pts {
        let dx = t - tx;
        let dy = v.ln() - ly;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(MetricsError::Degenerate);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    };
    Ok(RateFit {
        slope,
        intercept: ly - slope * tx,
        r2,
        tau: pts[0].0,
    })
}

/// Smallest burn-in `b ≤ max` after which the series is strictly decreasing, else `max`.
pub fn auto_burn_in(series: &[(f64, f64)], max: usize) -> usize {
    (0..=max)
        .find(|&b| {
            series
                .get(b..)
                .is_some_and(|s| s.windows(2).all(|w| w[1].1 < w[0].1))
        })
        .unwrap_or(max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_sequence_is_exact() {
        let s: Vec<_> = (0..10).map(|t| (t as f64, (-(t as f64)).exp2())).collect();
        let fit = rate_fit(&s, 0).unwrap();
        assert!((fit.slope + std::f64::consts::LN_2).abs() < 1e-14);
        assert!((fit.r2 - 1.0).abs() < 1e-14);
        assert_eq!(fit.tau, 0.0);
    }

    #[test]
    fn constant_is_degenerate() {
        let s: Vec<_> = (0..6).map(|t| (t as f64, 0.3)).collect();
        assert!(matches!(rate_fit(&s, 0), Err(MetricsError::Degenerate)));
    }

    #[test]
    fn burn_in_drops_prefix() {
        let s = vec![
            (0.0, 1.0),
            (1.0, 1.0),
            (2.0, 0.5),
            (3.0, 0.25),
            (4.0, 0.125),
            (5.0, 0.0625),
        ];
        assert_eq!(auto_burn_in(&s, 4), 1);
        let fit = rate_fit(&s, 2).unwrap();
        assert_eq!(fit.tau, 2.0);
        assert!(matches!(
            rate_fit(&s, 3),
            Err(MetricsError::TooFewPoints(3))
        ));
    }
}
