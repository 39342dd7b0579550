//! Mixing diagnostics: geometric mixing scale, mix-norm, negative Sobolev norms and decay fits.

mod ball;
mod rate;
mod spectral;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::field::{Domain, ScalarGrid};
use crate::Real;

pub use ball::{
    ball_average_at, ball_average_field, geometric_scale, geometric_scale_with, mix_norm,
    mix_norm_ladder, mix_norm_with, Lod,
};
pub use rate::{auto_burn_in, rate_fit, RateFit};
pub use spectral::{sobolev_norm_torus, MEAN_ZERO_TOL};

/// Values this far below the series maximum are treated as exact zeros by [`MixingReport::fit_rate`].
pub const ROUND_OFF_FLOOR: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("radius {0} outside (0, 1)")]
    RadiusOutOfRange(f64),
    #[error("field is identically zero")]
    ZeroField,
    #[error("spectral norms need a torus field")]
    NotTorus,
    #[error("field mean {0:e} exceeds the mean-zero tolerance")]
    NotMeanZero(f64),
    #[error("series is constant")]
    Degenerate,
    #[error("need at least 4 points after burn-in, got {0}")]
    TooFewPoints(usize),
    #[error("non-positive value {v} at t = {t}")]
    NonPositive { t: f64, v: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// One entry per configured κ, in order.
    pub geometric_scale: Vec<f64>,
    pub mix_norm: f64,
    pub h_minus_half: Option<f64>,
    pub h_minus_one: Option<f64>,
    pub sup_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub kappas: Vec<f64>,
    pub records: Vec<StepRecord>,
    /// Fit of the mix-norm series.
    pub fit: Option<RateFit>,
}

impl StepRecord {
    pub fn measure<F: Real>(
        step: usize,
        grid: &ScalarGrid<F>,
        kappas: &[f64],
    ) -> Result<Self, MetricsError> {
        let geometric_scale = kappas
            .iter()
            .map(|&k| match geometric_scale(grid, F::lit(k)) {
                Ok(e) => Ok(e.to_f64().unwrap()),
                Err(MetricsError::ZeroField) => Ok(0.0),
                Err(e) => Err(e),
            })
            .collect::<Result<_, _>>()?;
        let (h_minus_half, h_minus_one) = if grid.domain() == Domain::Torus {
            let g = grid.mean_zero_normalize();
            (
                Some(sobolev_norm_torus(&g, F::lit(0.5))?.to_f64().unwrap()),
                Some(sobolev_norm_torus(&g, F::one())?.to_f64().unwrap()),
            )
        } else {
            (None, None)
        };
        Ok(Self {
            step,
            geometric_scale,
            mix_norm: mix_norm(grid).to_f64().unwrap(),
            h_minus_half,
            h_minus_one,
            sup_norm: grid.sup_norm().to_f64().unwrap(),
        })
    }
}

impl MixingReport {
    pub fn new(kappas: Vec<f64>) -> Self {
        Self {
            kappas,
            records: Vec::new(),
            fit: None,
        }
    }

    pub fn push<F: Real>(&mut self, step: usize, grid: &ScalarGrid<F>) -> Result<(), MetricsError> {
        self.records
            .push(StepRecord::measure(step, grid, &self.kappas)?);
        Ok(())
    }

    pub fn mix_norm_series(&self) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .map(|r| (r.step as f64, r.mix_norm))
            .collect()
    }

    /// Fits the mix-norm series; `burn_in = None` picks it with [`auto_burn_in`].
    /// The series is cut before the first value at round-off level ([`ROUND_OFF_FLOOR`]
    /// relative to its maximum). A fit that cannot be computed leaves `fit` empty.
    pub fn fit_rate(&mut self, burn_in: Option<usize>) -> Option<RateFit> {
        let mut s = self.mix_norm_series();
        let max = s.iter().map(|p| p.1).fold(0.0, f64::max);
        if let Some(cut) = s.iter().position(|p| p.1 <= ROUND_OFF_FLOOR * max) {
            s.truncate(cut);
        }
        let b = burn_in.unwrap_or_else(|| auto_burn_in(&s, 4));
        self.fit = rate_fit(&s, b).ok();
        self.fit
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<(), MetricsError> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), MetricsError> {
        let mut header = vec!["step".to_string()];
        header.extend(self.kappas.iter().map(|k| format!("geometric_scale_{k}")));
        header.extend(["mix_norm", "h_minus_half", "h_minus_one", "sup_norm"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![r.step.to_string()];
            row.extend(r.geometric_scale.iter().map(|e| e.to_string()));
            row.extend([
                r.mix_norm.to_string(),
                opt(r.h_minus_half),
                opt(r.h_minus_one),
                r.sup_norm.to_string(),
            ]);
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}
