//! Step engines (GD, Nesterov, Anderson in raw and momentum form, energy-guarded
//! Anderson) and a runner that records a full diagnostic trace.

mod guard;
mod run;
mod steps;
mod trace_io;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::history::HistoryBuffer;
use crate::mixing::{Regularization, StepDiagnostics};
use crate::problems::Oracle;

pub use guard::{energy_guard, enforce_mass_bounds, GuardBranch};
pub use run::{run, run_with_options, stability_check, RunOptions, RunStatus, RunTrace, StabilityReport};
pub use steps::{aa2_step, aa_momentum_step, egaa_step, gd_step, nag_step, step};
pub use trace_io::{read_iterates_csv, read_trace_csv, write_iterates_csv, write_trace_csv, TraceRow};

/// Iterates whose norm exceeds this are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gd,
    Nag,
    /// Raw Type-II Anderson update `x_k + r_k - (X_k + R_k) theta`.
    Aa2,
    /// The same update written as multi-step momentum.
    AaMomentum,
    Egaa,
}

impl Method {
    pub fn is_anderson(self) -> bool {
        matches!(self, Method::Aa2 | Method::AaMomentum | Method::Egaa)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Nag => "nag",
            Method::Aa2 => "aa2",
            Method::AaMomentum => "aa_momentum",
            Method::Egaa => "egaa",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Step-size factor in front of the gradient-difference damping term
/// `-eta * factor * (grad f(x_k) - grad f(x_{k-1}))`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingScale {
    /// `factor = beta`, the scale-invariant discretization of `sqrt(h) Hess f v`.
    #[default]
    Beta,
    /// `factor = sqrt(beta)`.
    SqrtBeta,
}

impl DampingScale {
    pub fn factor(self, beta: f64) -> f64 {
        match self {
            DampingScale::Beta => beta,
            DampingScale::SqrtBeta => beta.sqrt(),
        }
    }
}

fn default_depth() -> usize {
    3
}
fn default_delta_max() -> f64 {
    2.0
}
fn default_mass_floor() -> f64 {
    1e-3
}
fn default_max_iters() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Gradient step `beta` (the `h` of the continuous-time scaling).
    pub step_beta: f64,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default)]
    pub lambda: Regularization,
    /// Maximum allowed growth of the effective mass per step.
    #[serde(default = "default_delta_max")]
    pub delta_max: f64,
    /// Strength of the gradient-difference damping term.
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub damping_scale: DampingScale,
    #[serde(default = "default_mass_floor")]
    pub mass_floor: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Stop once the stationarity measure drops to this value. `None` or a
    /// non-finite value disables the test.
    #[serde(default)]
    pub grad_tol: Option<f64>,
    /// Compare mass growth against `delta_max * sqrt(beta)` instead of `delta_max`.
    #[serde(default)]
    pub scale_guard_by_sqrt_beta: bool,
}

impl OptimizerConfig {
    pub fn new(method: Method, step_beta: f64) -> Self {
        OptimizerConfig {
            method,
            step_beta,
            depth: default_depth(),
            lambda: Regularization::default(),
            delta_max: default_delta_max(),
            eta: 0.0,
            damping_scale: DampingScale::default(),
            mass_floor: default_mass_floor(),
            max_iters: default_max_iters(),
            grad_tol: None,
            scale_guard_by_sqrt_beta: false,
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn with_guard(mut self, delta_max: f64, eta: f64) -> Self {
        self.delta_max = delta_max;
        self.eta = eta;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_grad_tol(mut self, tol: f64) -> Self {
        self.grad_tol = Some(tol);
        self
    }

    pub fn with_lambda(mut self, lambda: Regularization) -> Self {
        self.lambda = lambda;
        self
    }

    pub(crate) fn tolerance(&self) -> Option<f64> {
        self.grad_tol.filter(|t| t.is_finite())
    }

    pub(crate) fn guard_threshold(&self) -> f64 {
        if self.scale_guard_by_sqrt_beta {
            self.delta_max * self.step_beta.sqrt()
        } else {
            self.delta_max
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        if !(self.step_beta > 0.0) || !self.step_beta.is_finite() {
            return Err(Error::invalid(
                "step_beta",
                format!("must be positive, got {}", self.step_beta),
            ));
        }
        if self.method.is_anderson() && self.depth == 0 {
            return Err(Error::invalid("depth", "Anderson methods need depth >= 1"));
        }
        if !(self.delta_max > 0.0) {
            return Err(Error::invalid(
                "delta_max",
                format!("must be positive, got {}", self.delta_max),
            ));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::invalid("eta", format!("must be nonnegative, got {}", self.eta)));
        }
        if !(self.mass_floor > 0.0 && self.mass_floor < 0.5) {
            return Err(Error::invalid(
                "mass_floor",
                format!("must lie in (0, 0.5), got {}", self.mass_floor),
            ));
        }
        match self.lambda {
            Regularization::Absolute(l) | Regularization::Relative(l) if !(l >= 0.0) => {
                Err(Error::invalid("lambda", format!("must be nonnegative, got {l}")))
            }
            _ => Ok(()),
        }
    }
}

/// Mutable state of one optimizer run.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub x: DVector<f64>,
    pub x_prev: Option<DVector<f64>>,
    /// `grad f(x)` at the current iterate.
    pub grad: DVector<f64>,
    pub grad_prev: Option<DVector<f64>>,
    pub history: HistoryBuffer,
    /// Effective mass applied at the previous Anderson step (starts at 1).
    pub mass_prev: f64,
    /// Nesterov sequence value `t_{k}`, starting from `t_0 = 1`.
    pub nag_t: f64,
    /// Number of steps taken.
    pub k: usize,
}

impl OptimizerState {
    pub fn new(oracle: &dyn Oracle, x0: DVector<f64>, depth: usize) -> Self {
        let grad = oracle.gradient(&x0);
        OptimizerState {
            x: x0,
            x_prev: None,
            grad,
            grad_prev: None,
            history: HistoryBuffer::new(depth),
            mass_prev: 1.0,
            nag_t: 1.0,
            k: 0,
        }
    }
}

/// One row of a run trace: the iterate after step `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub f_value: f64,
    pub grad_norm: f64,
    /// Present for Anderson-family steps that used a nonempty history.
    pub diagnostics: Option<StepDiagnostics>,
    pub wall_nanos: u64,
}

/// `|grad f(x)|`, or the gradient-mapping norm `|x - P(x - beta grad)| / beta`
/// for constrained problems.
pub fn stationarity(oracle: &dyn Oracle, x: &DVector<f64>, grad: &DVector<f64>, beta: f64) -> f64 {
    if oracle.is_constrained() {
        let mapped = oracle.project(x - grad * beta);
        (x - mapped).norm() / beta
    } else {
        grad.norm()
    }
}
