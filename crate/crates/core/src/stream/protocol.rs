//! Time-periodic, piecewise-constant-in-time velocity fields.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{PeriodTable, StreamError, StreamSpec, StreamVariant, SuperStream};
use crate::field::Domain;

/// The field active on one segment of the schedule. Stream-based fields are `∇^⊥` of the
/// normalized stream `½ ψ^α` in the named arrangement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "field", rename_all = "snake_case")]
pub enum FieldDescriptor {
    /// `w = ∇^⊥φ`, one rotating cell per half of the square.
    W,
    /// `-v = -∇^⊥ψ`, the whole square rotating.
    MinusV,
    /// `w' = ∇^⊥φ'` on the torus.
    WPrime,
    /// `-v' = -∇^⊥ψ'` on the torus.
    MinusVPrime,
    Constant {
        value: Vec<f64>,
    },
    /// `R^{-1} w(R x)` with `R(x, y) = (1 - y, x)`.
    RotatedW,
    /// A planar field acting on coordinates `(axes[0], axes[1])` of a `d`-dimensional point.
    Embedded {
        axes: [usize; 2],
        inner: Box<FieldDescriptor>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub field: FieldDescriptor,
}

#[derive(Clone, Debug)]
enum Compiled {
    Stream {
        stream: SuperStream,
        sign: f64,
    },
    Rotated(SuperStream),
    Constant(Vec<f64>),
    Embedded {
        axes: [usize; 2],
        inner: Box<Compiled>,
    },
}

impl Compiled {
    fn planar(&self, p: [f64; 2]) -> Result<[f64; 2], StreamError> {
        match self {
            Self::Stream { stream, sign } => stream.velocity(p).map(|v| v.map(|c| sign * c)),
            Self::Rotated(stream) => {
                let w = stream.velocity([1.0 - p[1], p[0]])?;
                Ok([w[1], -w[0]])
            }
            Self::Constant(c) if c.len() == 2 => Ok([c[0], c[1]]),
            _ => Err(StreamError::Dimension(2)),
        }
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), StreamError> {
        match self {
            Self::Constant(c) => {
                if c.len() != x.len() {
                    return Err(StreamError::Dimension(x.len()));
                }
                out.copy_from_slice(c);
            }
            Self::Embedded { axes, inner } => {
                out.fill(0.0);
                let v = inner.planar([x[axes[0]], x[axes[1]]])?;
                out[axes[0]] = v[0];
                out[axes[1]] = v[1];
            }
            _ => {
                if x.len() != 2 {
                    return Err(StreamError::Dimension(x.len()));
                }
                let v = self.planar([x[0], x[1]])?;
                out.copy_from_slice(&v);
            }
        }
        Ok(())
    }
}

/// A velocity field `u(x, t)` that is periodic in `t` and constant in `t` on each segment.
#[derive(Clone, Debug)]
pub struct VelocityProtocol {
    pub period: f64,
    pub schedule: Vec<Segment>,
    pub domain: Domain,
    pub dim: usize,
    /// Whether the half-square-based torus field carries the single global sign flip that
    /// makes the time-one map agree with `T'`.
    pub orientation_flip: bool,
    pub alpha: f64,
    pub table: Arc<PeriodTable>,
    compiled: Vec<Compiled>,
}

/// Every stream in a protocol uses `½ ψ^α`.
const NORMALIZATION: f64 = 0.5;

impl VelocityProtocol {
    pub fn new(
        schedule: Vec<Segment>,
        domain: Domain,
        dim: usize,
        orientation_flip: bool,
        table: Arc<PeriodTable>,
    ) -> Result<Self, StreamError> {
        if dim < 2 {
            return Err(StreamError::Dimension(dim));
        }
        let period = schedule.last().map_or(0.0, |s| s.end);
        let partitions = !schedule.is_empty()
            && schedule[0].start == 0.0
            && schedule.windows(2).all(|w| w[0].end == w[1].start)
            && schedule.iter().all(|s| s.end > s.start);
        if !partitions {
            return Err(StreamError::Cache(
                "schedule does not partition [0, period)".into(),
            ));
        }
        let alpha = table.alpha;
        let compiled = schedule
            .iter()
            .map(|s| compile(&s.field, dim, orientation_flip, &table))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            period,
            schedule,
            domain,
            dim,
            orientation_flip,
            alpha,
            table,
            compiled,
        })
    }

    /// `[0, ½)`: `w`; `[½, 1)`: `-v`. Time-one map `T`.
    pub fn box_2d(table: Arc<PeriodTable>) -> Result<Self, StreamError> {
        Self::new(
            two_step(FieldDescriptor::W, FieldDescriptor::MinusV),
            Domain::Box,
            2,
            false,
            table,
        )
    }

    /// `[0, ½)`: `w`; `[½, 1)`: `R^{-1} w(R ·)`. Time-one map `R^{-2} T^2`.
    pub fn box_rotated(table: Arc<PeriodTable>) -> Result<Self, StreamError> {
        Self::new(
            two_step(FieldDescriptor::W, FieldDescriptor::RotatedW),
            Domain::Box,
            2,
            false,
            table,
        )
    }

    /// `[0, ½)`: `(½, ½)`; `[½, ¾)`: `w'`; `[¾, 1)`: `-v'`. Time-one map `T'`.
    pub fn torus_2d(table: Arc<PeriodTable>) -> Result<Self, StreamError> {
        let schedule = vec![
            Segment {
                start: 0.0,
                end: 0.5,
                field: FieldDescriptor::Constant {
                    value: vec![0.5, 0.5],
                },
            },
            Segment {
                start: 0.5,
                end: 0.75,
                field: FieldDescriptor::WPrime,
            },
            Segment {
                start: 0.75,
                end: 1.0,
                field: FieldDescriptor::MinusVPrime,
            },
        ];
        Self::new(schedule, Domain::Torus, 2, true, table)
    }

    /// Period `d - 1`; on `[i, i+1)` the planar box protocol acts on coordinates `(i, d-1)`.
    pub fn box_d(dim: usize, table: Arc<PeriodTable>) -> Result<Self, StreamError> {
        if dim == 2 {
            return Self::box_2d(table);
        }
        Self::new(
            embed(dim, &two_step(FieldDescriptor::W, FieldDescriptor::MinusV)),
            Domain::Box,
            dim,
            false,
            table,
        )
    }

    /// Torus analogue of [`Self::box_d`].
    pub fn torus_d(dim: usize, table: Arc<PeriodTable>) -> Result<Self, StreamError> {
        let planar = Self::torus_2d(table.clone())?;
        if dim == 2 {
            return Ok(planar);
        }
        Self::new(
            embed(dim, &planar.schedule),
            Domain::Torus,
            dim,
            true,
            table,
        )
    }

    /// Index of the segment active at time `t`.
    pub fn segment_at(&self, t: f64) -> usize {
        let tau = t.rem_euclid(self.period);
        self.schedule
            .iter()
            .position(|s| tau < s.end)
            .unwrap_or(self.schedule.len() - 1)
    }

    /// Segment boundaries within one period, `0` included, `period` excluded.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.schedule.iter().map(|s| s.start).collect()
    }

    /// Velocity of segment `k` at `x`, written to `out`.
    pub fn eval_segment(&self, k: usize, x: &[f64], out: &mut [f64]) -> Result<(), StreamError> {
        if x.len() != self.dim || out.len() != self.dim {
            return Err(StreamError::Dimension(x.len()));
        }
        self.compiled[k].eval(x, out)
    }

    /// The constant velocity of segment `k`, if it is a translation.
    pub fn constant(&self, k: usize) -> Option<&[f64]> {
        match &self.compiled[k] {
            Compiled::Constant(c) => Some(c),
            _ => None,
        }
    }

    /// Per-axis distance from `x` to the nearest edge of a stream patch of segment `k`
    /// (domain boundary, cut lines and cell edges), where the field is only Hölder. Axes the
    /// segment does not move get `∞`, as does every axis of a translation.
    pub fn edge_gaps(&self, k: usize, x: &[f64], out: &mut [f64]) {
        fn spacing(f: &FieldDescriptor) -> Option<[f64; 2]> {
            match f {
                FieldDescriptor::W => Some([0.5, 1.0]),
                FieldDescriptor::MinusV => Some([1.0, 1.0]),
                FieldDescriptor::WPrime => Some([0.25, 0.5]),
                FieldDescriptor::MinusVPrime => Some([0.5, 0.5]),
                FieldDescriptor::RotatedW => Some([1.0, 0.5]),
                _ => None,
            }
        }
        out.fill(f64::INFINITY);
        let (axes, field) = match &self.schedule[k].field {
            FieldDescriptor::Embedded { axes, inner } => (*axes, inner.as_ref()),
            f => ([0, 1], f),
        };
        let Some(e) = spacing(field) else { return };
        for a in 0..2 {
            let u = x[axes[a]] / e[a];
            let frac = u - u.floor();
            out[axes[a]] = frac.min(1.0 - frac) * e[a];
        }
    }

    /// Cut lines of segment `k` as `(axis, coordinate)`: the field is only Lipschitz across them
    /// and is not evaluated on them. Particles never cross them.
    pub fn cuts(&self, k: usize) -> Vec<(usize, f64)> {
        fn planar(f: &FieldDescriptor) -> Vec<(usize, f64)> {
            match f {
                FieldDescriptor::W => vec![(0, 0.5)],
                FieldDescriptor::WPrime => vec![(0, 0.25), (0, 0.75)],
                FieldDescriptor::RotatedW => vec![(1, 0.5)],
                _ => Vec::new(),
            }
        }
        match &self.schedule[k].field {
            FieldDescriptor::Embedded { axes, inner } => planar(inner)
                .into_iter()
                .map(|(a, c)| (axes[a], c))
                .collect(),
            f => planar(f),
        }
    }
}

fn two_step(first: FieldDescriptor, second: FieldDescriptor) -> Vec<Segment> {
    vec![
        Segment {
            start: 0.0,
            end: 0.5,
            field: first,
        },
        Segment {
            start: 0.5,
            end: 1.0,
            field: second,
        },
    ]
}

fn embed(dim: usize, planar: &[Segment]) -> Vec<Segment> {
    (0..dim - 1)
        .flat_map(|i| {
            planar.iter().map(move |s| Segment {
                start: i as f64 + s.start,
                end: i as f64 + s.end,
                field: match &s.field {
                    FieldDescriptor::Constant { value } => {
                        let mut v = vec![0.0; dim];
                        v[i] = value[0];
                        v[dim - 1] = value[1];
                        FieldDescriptor::Constant { value: v }
                    }
                    f => FieldDescriptor::Embedded {
                        axes: [i, dim - 1],
                        inner: Box::new(f.clone()),
                    },
                },
            })
        })
        .collect()
}

fn compile(
    f: &FieldDescriptor,
    dim: usize,
    flip: bool,
    table: &Arc<PeriodTable>,
) -> Result<Compiled, StreamError> {
    let stream = |variant| -> Result<SuperStream, StreamError> {
        SuperStream::new(
            StreamSpec::new(table.alpha, variant, NORMALIZATION)?,
            table.clone(),
            flip,
        )
    };
    Ok(match f {
        FieldDescriptor::W => Compiled::Stream {
            stream: stream(StreamVariant::HalfSquare)?,
            sign: 1.0,
        },
        FieldDescriptor::MinusV => Compiled::Stream {
            stream: stream(StreamVariant::WholeSquare)?,
            sign: -1.0,
        },
        FieldDescriptor::WPrime => Compiled::Stream {
            stream: stream(StreamVariant::PeriodicPhi)?,
            sign: 1.0,
        },
        FieldDescriptor::MinusVPrime => Compiled::Stream {
            stream: stream(StreamVariant::PeriodicPsi)?,
            sign: -1.0,
        },
        FieldDescriptor::RotatedW => Compiled::Rotated(stream(StreamVariant::HalfSquare)?),
        FieldDescriptor::Constant { value } => {
            if value.len() != dim {
                return Err(StreamError::Dimension(value.len()));
            }
            Compiled::Constant(value.clone())
        }
        FieldDescriptor::Embedded { axes, inner } => {
            if axes[0] >= dim || axes[1] >= dim || axes[0] == axes[1] {
                return Err(StreamError::Dimension(dim));
            }
            Compiled::Embedded {
                axes: *axes,
                inner: Box::new(compile(inner, 2, flip, table)?),
            }
        }
    })
}

/// `u(x, t)`.
pub fn velocity_at(
    protocol: &VelocityProtocol,
    x: &[f64],
    t: f64,
) -> Result<Vec<f64>, StreamError> {
    let mut out = vec![0.0; protocol.dim];
    protocol.eval_segment(protocol.segment_at(t), x, &mut out)?;
    Ok(out)
}
