//! Fractional regularity of the constant-period stream, log-concavity and derivative envelopes.

mod lambda;
mod pointwise;
mod probe;

use std::sync::Arc;

use thiserror::Error;

pub use lambda::{lambda_gamma, lambda_gamma_scalar, QuadSpec, Rect};
pub use pointwise::{
    envelope_check, log_concavity_check, EnvelopeReport, LogConcavityReport, ENVELOPE_STABILITY,
    HESSIAN_TOL,
};
pub use probe::{
    classify, predicted_threshold, singular_exponent, write_summary_csv, wsp_probe,
    wsp_probe_multi, Classification, RegularityProbeReport, Verdict, CHECK_STRIDE, CONVERGING_BAND,
    DIVERGING_RATIO,
};

use crate::stream::{PeriodTable, StreamError, StreamSpec, StreamVariant, SuperStream};

#[derive(Debug, Error)]
pub enum RegularityError {
    #[error("gamma {0} outside (0, 1)")]
    GammaOutOfRange(f64),
    #[error("point {0:?} is not interior")]
    NotInterior(Vec<f64>),
    #[error("quadrature unstable at {x:?}: {coarse} vs refined {refined}")]
    QuadratureUnstable {
        x: Vec<f64>,
        coarse: f64,
        refined: f64,
    },
    #[error("bad resolutions: {0}")]
    Resolutions(String),
    #[error("{0}")]
    Parameter(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
}

/// `(∂_xx, ∂_xy, ∂_yy) ψ^α` on the unit square, for the table's `α`.
pub fn super_hessian(
    table: Arc<PeriodTable>,
) -> Result<impl Fn([f64; 2]) -> [f64; 3] + Sync, RegularityError> {
    let spec = StreamSpec::new(table.alpha, StreamVariant::WholeSquare, 1.0)?;
    let stream = SuperStream::new(spec, table, false)?;
    Ok(move |x: [f64; 2]| match stream.hessian(x) {
        Ok(h) => [h[0][0], h[0][1], h[1][1]],
        Err(_) => [f64::NAN; 3],
    })
}
