use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar function of time used for the mass, damping and Hessian-damping
/// weight of the continuous-time models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant {
        value: f64,
    },
    /// `scale / t`.
    InverseTime {
        scale: f64,
    },
    /// `offset + slope * t`.
    Affine {
        offset: f64,
        slope: f64,
    },
    /// Linear interpolation between knots, held constant outside them.
    PiecewiseLinear {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule::Constant { value }
    }

    pub fn piecewise_linear(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::invalid(
                "times",
                "knots and values must be nonempty and of equal length",
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("times", "knots must be strictly increasing"));
        }
        if values.iter().chain(&times).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("piecewise_linear"));
        }
        Ok(Schedule::PiecewiseLinear { times, values })
    }

    fn segment(times: &[f64], t: f64) -> usize {
        // Index i with times[i] <= t < times[i + 1], clamped to valid segments.
        times
            .partition_point(|&s| s <= t)
            .saturating_sub(1)
            .min(times.len().saturating_sub(2))
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Schedule::Constant { value } => *value,
            Schedule::InverseTime { scale } => scale / t,
            Schedule::Affine { offset, slope } => offset + slope * t,
            Schedule::PiecewiseLinear { times, values } => {
                if times.len() == 1 || t <= times[0] {
                    return values[0];
                }
                if t >= times[times.len() - 1] {
                    return values[values.len() - 1];
                }
                let i = Self::segment(times, t);
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    /// Derivative; for piecewise-linear schedules the slope of the segment
    /// starting at `t` (forward difference at knots).
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Schedule::Constant { .. } => 0.0,
            Schedule::InverseTime { scale } => -scale / (t * t),
            Schedule::Affine { slope, .. } => *slope,
            Schedule::PiecewiseLinear { times, values } => {
                if times.len() == 1 || t < times[0] || t >= times[times.len() - 1] {
                    return 0.0;
                }
                let i = Self::segment(times, t);
                (values[i + 1] - values[i]) / (times[i + 1] - times[i])
            }
        }
    }

    /// Centered difference `(s(t + dt) - s(t - dt)) / (2 dt)`.
    pub fn centered_derivative(&self, t: f64, dt: f64) -> f64 {
        (self.value(t + dt) - self.value(t - dt)) / (2.0 * dt)
    }
}

fn default_floor() -> f64 {
    1e-3
}

/// Coefficient functions of `M x'' + c x' + grad f + sqrt(h) b(t) Hess f x' = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedules {
    pub mass: Schedule,
    pub damping: Schedule,
    /// Weight `b(t)` of the Hessian-driven damping term.
    pub geom_beta: Schedule,
    pub sqrt_h: f64,
    #[serde(default = "default_floor")]
    pub mass_floor: f64,
}

impl Schedules {
    /// `M = 1`, `c = 3 / t`, no Hessian damping.
    pub fn avd() -> Self {
        Schedules {
            mass: Schedule::constant(1.0),
            damping: Schedule::InverseTime { scale: 3.0 },
            geom_beta: Schedule::constant(0.0),
            sqrt_h: 0.0,
            mass_floor: default_floor(),
        }
    }

    pub fn mass_at(&self, t: f64) -> Result<f64> {
        let m = self.mass.value(t);
        if !(m >= self.mass_floor) {
            return Err(Error::MassBelowFloor {
                t,
                mass: m,
                floor: self.mass_floor,
            });
        }
        Ok(m)
    }
}
