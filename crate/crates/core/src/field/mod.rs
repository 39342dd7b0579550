//! Cell-averaged scalar fields on dyadic grids.

mod generate;
mod io;
mod pullback;

use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicError;
use crate::Real;

pub use generate::{generate, InitialDataSpec, InitialKind, DEFAULT_SPECTRAL_CUTOFF, SPECTRAL_EPS};
pub use pullback::{pullback_exact, pullback_series, DyadicGridFunction, PullbackOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// The unit cube, with the field extended by zero outside.
    Box,
    Torus,
}

impl Domain {
    pub fn tag(self) -> u8 {
        match self {
            Self::Box => 0,
            Self::Torus => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Self::Box),
            1 => Some(Self::Torus),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("resolution 2^{n} cannot resolve features of scale 2^-{needed}")]
    ResolutionTooCoarse { needed: u32, n: u32 },
    #[error("expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("grids must have dimension 2 or 3, got {0}")]
    Dimension(usize),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error("malformed grid file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Cell averages on a grid with `2^n` cells per axis, stored with axis 0 varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid<F> {
    dim: usize,
    n: u32,
    domain: Domain,
    values: Vec<F>,
    mean: F,
}

/// Neumaier-compensated sum, so the mean cache does not depend on grid size.
pub(crate) fn compensated_sum<F: Real>(values: impl IntoIterator<Item = F>) -> F {
    let mut sum = F::zero();
    let mut c = F::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

impl<F: Real> ScalarGrid<F> {
    pub fn new(dim: usize, n: u32, domain: Domain, values: Vec<F>) -> Result<Self, FieldError> {
        if !(2..=3).contains(&dim) {
            return Err(FieldError::Dimension(dim));
        }
        let expected = 1usize << (dim as u32 * n);
        if values.len() != expected {
            return Err(FieldError::Shape {
                expected,
                got: values.len(),
            });
        }
        let mean = compensated_sum(values.iter().copied()) / F::lit(expected as f64);
        Ok(Self {
            dim,
            n,
            domain,
            values,
            mean,
        })
    }

    pub fn zeros(dim: usize, n: u32, domain: Domain) -> Self {
        Self::new(dim, n, domain, vec![F::zero(); 1usize << (dim as u32 * n)]).expect("valid shape")
    }

    /// Builds a grid from a function of the cell index vector.
    pub fn from_fn(dim: usize, n: u32, domain: Domain, f: impl Fn(&[usize]) -> F) -> Self {
        let side = 1usize << n;
        let len = 1usize << (dim as u32 * n);
        let mut idx = vec![0usize; dim];
        let values = (0..len)
            .map(|flat| {
                let mut r = flat;
                for slot in idx.iter_mut() {
                    *slot = r % side;
                    r /= side;
                }
                f(&idx)
            })
            .collect();
        Self::new(dim, n, domain, values).expect("valid shape")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn side(&self) -> usize {
        1 << self.n
    }

    pub fn cell_width(&self) -> F {
        F::lit((-(self.n as f64)).exp2())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn into_values(self) -> Vec<F> {
        self.values
    }

    pub fn mean(&self) -> F {
        self.mean
    }

    /// Same grid shape with new values.
    pub fn with_values(&self, values: Vec<F>) -> Self {
        Self::new(self.dim, self.n, self.domain, values).expect("same shape")
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, a: F) -> Self {
        self.map(|v| v * a)
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().rev().fold(0, |acc, &i| acc * self.side() + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let side = self.side();
        (0..self.dim)
            .map(|_| {
                let i = flat % side;
                flat /= side;
                i
            })
            .collect()
    }

    pub fn get(&self, idx: &[usize]) -> F {
        self.values[self.flat_index(idx)]
    }

    pub fn cell_center(&self, flat: usize) -> Vec<F> {
        let h = self.cell_width();
        self.multi_index(flat)
            .into_iter()
            .map(|i| (F::lit(i as f64) + F::lit(0.5)) * h)
            .collect()
    }

    /// Value of the piecewise-constant field at `x`; zero outside the box, periodic on the torus.
    pub fn value_at(&self, x: &[F]) -> F {
        let side = self.side() as i64;
        let mut flat = 0usize;
        for a in (0..self.dim).rev() {
            let mut i = (x[a] * F::lit(side as f64))
                .floor()
                .to_i64()
                .unwrap_or(i64::MIN);
            match self.domain {
                Domain::Torus => i = i.rem_euclid(side),
                Domain::Box => {
                    if i < 0 || i >= side {
                        return F::zero();
                    }
                }
            }
            flat = flat * side as usize + i as usize;
        }
        self.values[flat]
    }

    pub fn sup_norm(&self) -> F {
        self.values.iter().fold(F::zero(), |m, v| m.max(v.abs()))
    }

    /// `(∫|f|^p)^{1/p}` for the piecewise-constant field.
    pub fn lp_norm(&self, p: F) -> F {
        let s = compensated_sum(self.values.iter().map(|v| v.abs().powf(p)));
        (s / F::lit(self.len() as f64)).powf(F::one() / p)
    }

    /// `∫|f - g|`.
    pub fn l1_distance(&self, other: &Self) -> F {
        let s = compensated_sum(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (*a - *b).abs()),
        );
        s / F::lit(self.len() as f64)
    }

    pub fn mean_zero_normalize(&self) -> Self {
        let m = self.mean;
        let shifted = self.map(|v| v - m);
        // One more pass removes the rounding left by the first subtraction.
        let m2 = shifted.mean;
        shifted.map(|v| v - m2)
    }

    /// Averages `2^b`-blocks per axis into a grid of resolution `n - b`.
    pub fn block_average(&self, b: u32) -> Self {
        assert!(b <= self.n);
        if b == 0 {
            return self.clone();
        }
        let coarse_n = self.n - b;
        let cs = 1usize << coarse_n;
        let mut sums = vec![F::zero(); 1usize << (self.dim as u32 * coarse_n)];
        let side = self.side();
        for (flat, &v) in self.values.iter().enumerate() {
            let mut r = flat;
            let mut c = 0usize;
            let mut stride = 1usize;
            for _ in 0..self.dim {
                c += ((r % side) >> b) * stride;
                r /= side;
                stride *= cs;
            }
            sums[c] += v;
        }
        let w = F::lit((-((self.dim as u32 * b) as f64)).exp2());
        Self::new(
            self.dim,
            coarse_n,
            self.domain,
            sums.into_iter().map(|s| s * w).collect(),
        )
        .expect("shape")
    }
}
