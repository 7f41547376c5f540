//! Objective oracles and the gradient-step fixed-point map.
//!
//! Every optimizer in this crate works against [`Oracle`]. The fixed-point map
//! used by Anderson mixing is `g(x) = P(x - beta * grad f(x))`, where `P` is the
//! oracle's feasibility projector (the identity for unconstrained problems), and
//! the residual is `r(x) = g(x) - x`.

mod config;
mod logistic;
mod nnls;
mod quadratic;
mod rosenbrock;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use config::{ProblemConfig, Spacing};
pub use logistic::Logistic;
pub use nnls::{Nnls, NnlsSpec};
pub use quadratic::Quadratic;
pub use rosenbrock::Rosenbrock;

/// Known constants of an objective. `None` means "not known".
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProblemMetadata {
    pub lipschitz: Option<f64>,
    pub strong_convexity: Option<f64>,
    pub hessian_lipschitz: Option<f64>,
    pub min_value: Option<f64>,
}

impl ProblemMetadata {
    /// `L / mu` when both are known and `mu > 0`.
    pub fn condition_number(&self) -> Option<f64> {
        match (self.lipschitz, self.strong_convexity) {
            (Some(l), Some(mu)) if mu > 0.0 => Some(l / mu),
            _ => None,
        }
    }
}

/// A smooth objective with first-order access and an optional projector.
///
/// Implementations are immutable after construction, so one oracle can be
/// shared by many concurrent runs.
pub trait Oracle: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Hessian-vector product. Defaults to a central difference of gradients.
    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        finite_difference_hvp(self, x, v)
    }

    /// Feasibility projector; the identity unless the problem is constrained.
    fn project(&self, x: DVector<f64>) -> DVector<f64> {
        x
    }

    fn is_constrained(&self) -> bool {
        false
    }

    fn metadata(&self) -> ProblemMetadata;
}

/// `(grad(x + eps v) - grad(x - eps v)) / (2 eps)` with
/// `eps = sqrt(machine eps) * (1 + |x|) / |v|`.
pub fn finite_difference_hvp<O: Oracle + ?Sized>(oracle: &O, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let v_norm = v.norm();
    if v_norm == 0.0 {
        return DVector::zeros(x.len());
    }
    let eps = f64::EPSILON.sqrt() * (1.0 + x.norm()) / v_norm;
    let forward = oracle.gradient(&(x + v * eps));
    let backward = oracle.gradient(&(x - v * eps));
    (forward - backward) / (2.0 * eps)
}

/// `g(x) = P(x - beta * grad f(x))`.
pub fn fixed_point_map<O: Oracle + ?Sized>(oracle: &O, x: &DVector<f64>, beta: f64) -> DVector<f64> {
    let step = x - oracle.gradient(x) * beta;
    oracle.project(step)
}

/// `r(x) = g(x) - x`; equals `-beta * grad f(x)` when the projector is the identity.
pub fn residual<O: Oracle + ?Sized>(oracle: &O, x: &DVector<f64>, beta: f64) -> DVector<f64> {
    fixed_point_map(oracle, x, beta) - x
}

/// Clamp every coordinate at zero.
pub fn project_nonnegative(mut x: DVector<f64>) -> DVector<f64> {
    x.iter_mut().for_each(|xi| *xi = xi.max(0.0));
    x
}
