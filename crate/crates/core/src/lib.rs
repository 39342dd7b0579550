//! Exact folded-Baker maps, the stream-function flows that realize them, and
//! mixing and regularity diagnostics.

pub mod counterexample;
pub mod dyadic;
pub mod field;
pub mod flow;
pub mod metrics;
pub mod ode;
mod quad;
pub mod regularity;
pub mod stream;

/// Floating-point scalar used by the numerical modules.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssign
    + rustfft::FftNum
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Grid = field::ScalarGrid<f64>;
pub type GridFunction = field::DyadicGridFunction<f64>;
pub type AdvectedField = flow::Advected<f64>;
pub type StreamJet = stream::Jet<f64>;
pub type BadSetField = counterexample::BadSet<f64>;
