//! Stream functions with constant level-set period and the velocity protocols built from them.

mod period;
mod protocol;
mod psi;

use std::sync::Arc;

use thiserror::Error;

pub use period::{
    orbit_return_time, period_at_boundary, period_at_max, period_coarea, period_orbit, period_t,
    superlevel_area, PeriodMethod, PeriodTable, TABLE_R_MIN, TABLE_VERSION,
};
pub use protocol::{velocity_at, FieldDescriptor, Segment, VelocityProtocol};
pub use psi::{
    eval_stream, psi_alpha, psi_alpha_value, sin_pi, Jet, Patch, StreamSpec, StreamVariant,
};

use psi::{locate, to_global, wrap_point};

/// `3 - √5`: the exponent for which the whole construction has the target regularity.
pub const ALPHA_STAR: f64 = 0.763_932_022_500_210_2;

/// Samples used for tables built on behalf of protocols.
pub const DEFAULT_TABLE_SAMPLES: usize = 257;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("alpha {0} outside (0, 1)")]
    AlphaOutOfRange(f64),
    #[error("level {0} outside (0, 1)")]
    LevelOutOfRange(f64),
    #[error("level set {0} not found")]
    LevelNotFound(f64),
    #[error("point {x:?} lies on a cut line")]
    OnCut { x: Vec<f64> },
    #[error("period table needs at least 64 samples, got {0}")]
    TableTooSmall(usize),
    #[error("period sample T({r}) = {t} is not positive and finite")]
    BadSample { r: f64, t: f64 },
    #[error("dimension {0} unsupported")]
    Dimension(usize),
    #[error("period cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Ode(#[from] crate::ode::OdeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// `normalization · variant[ψ^α]` with `ψ^α = ∫_0^{ψ_α} T`, backed by a shared period table.
#[derive(Clone, Debug)]
pub struct SuperStream {
    pub spec: StreamSpec,
    pub table: Arc<PeriodTable>,
    patches: Vec<Patch>,
}

impl SuperStream {
    /// `phi_flip` negates every half-square-based patch (the global orientation flip).
    pub fn new(
        spec: StreamSpec,
        table: Arc<PeriodTable>,
        phi_flip: bool,
    ) -> Result<Self, StreamError> {
        if table.alpha != spec.alpha {
            return Err(StreamError::Cache(format!(
                "table built for alpha {} used with {}",
                table.alpha, spec.alpha
            )));
        }
        let patches = spec.variant.patches(
            phi_flip
                && matches!(
                    spec.variant,
                    StreamVariant::HalfSquare | StreamVariant::PeriodicPhi
                ),
        );
        Ok(Self {
            spec,
            table,
            patches,
        })
    }

    fn local(&self, p: [f64; 2]) -> Result<(Patch, [f64; 2]), StreamError> {
        let p = wrap_point(p, self.spec.variant.is_periodic());
        if self.spec.variant.cuts().contains(&p[0]) {
            return Err(StreamError::OnCut { x: p.to_vec() });
        }
        let patch = self.patches[locate(&self.patches, p)];
        Ok((
            patch,
            [
                (p[0] - patch.lo[0]) / patch.size[0],
                (p[1] - patch.lo[1]) / patch.size[1],
            ],
        ))
    }

    pub fn value(&self, p: [f64; 2]) -> Result<f64, StreamError> {
        let (patch, q) = self.local(p)?;
        Ok(patch.coef
            * self.spec.normalization
            * self
                .table
                .cumulative(psi_alpha_value(self.spec.alpha, q[0], q[1])))
    }

    /// Gradient by the chain rule `∇ψ^α = T(ψ_α) ∇ψ_α`; no cumulative integral involved.
    pub fn gradient(&self, p: [f64; 2]) -> Result<[f64; 2], StreamError> {
        let (patch, q) = self.local(p)?;
        let j = psi_alpha(self.spec.alpha, q[0], q[1]);
        let t = self.table.period(j.value);
        let local = Jet {
            value: 0.0,
            grad: [t * j.grad[0], t * j.grad[1]],
            hess: [[0.0; 2]; 2],
        };
        Ok(to_global(local, &patch, self.spec.normalization).grad)
    }

    /// `D²ψ^α = T(ψ_α) D²ψ_α + T'(ψ_α) ∇ψ_α ∇ψ_αᵀ`.
    pub fn hessian(&self, p: [f64; 2]) -> Result<[[f64; 2]; 2], StreamError> {
        let (patch, q) = self.local(p)?;
        let j = psi_alpha(self.spec.alpha, q[0], q[1]);
        let (t, dt) = self.table.period_and_slope(j.value);
        let mut hess = [[0.0; 2]; 2];
        for (a, row) in hess.iter_mut().enumerate() {
            for (b, h) in row.iter_mut().enumerate() {
                *h = t * j.hess[a][b] + dt * j.grad[a] * j.grad[b];
            }
        }
        let local = Jet {
            value: 0.0,
            grad: [0.0; 2],
            hess,
        };
        Ok(to_global(local, &patch, self.spec.normalization).hess)
    }

    /// `∇^⊥ = (-∂_y, ∂_x)` of the stream.
    pub fn velocity(&self, p: [f64; 2]) -> Result<[f64; 2], StreamError> {
        let g = self.gradient(p)?;
        Ok([-g[1], g[0]])
    }
}

/// `ψ^α(x) = ∫_0^{ψ_α(x)} T` on the unit square.
pub fn eval_super_stream(table: &PeriodTable, p: [f64; 2]) -> f64 {
    table.cumulative(psi_alpha_value(table.alpha, p[0], p[1]))
}
