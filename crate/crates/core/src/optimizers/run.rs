use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::steps::step;
use super::{stationarity, IterationRecord, Method, OptimizerConfig, OptimizerState, DIVERGENCE_NORM};
use crate::error::{Error, Result};
use crate::problems::Oracle;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Measure per-step wall time (makes traces non-reproducible).
    pub record_timing: bool,
    /// Keep every iterate, starting with `x0`.
    pub keep_iterates: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIterations,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub method: Method,
    pub status: RunStatus,
    pub initial_value: f64,
    pub initial_grad_norm: f64,
    pub records: Vec<IterationRecord>,
    /// Last finite iterate.
    pub final_x: DVector<f64>,
    /// Filled only when requested through [`RunOptions::keep_iterates`].
    pub iterates: Vec<DVector<f64>>,
}

impl RunTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_value(&self) -> f64 {
        self.records.last().map_or(self.initial_value, |r| r.f_value)
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.records.last().map_or(self.initial_grad_norm, |r| r.grad_norm)
    }
}

pub fn run(oracle: &dyn Oracle, config: &OptimizerConfig, x0: &DVector<f64>) -> Result<RunTrace> {
    run_with_options(oracle, config, x0, RunOptions::default())
}

pub fn run_with_options(
    oracle: &dyn Oracle,
    config: &OptimizerConfig,
    x0: &DVector<f64>,
    options: RunOptions,
) -> Result<RunTrace> {
    config.validate()?;
    if x0.len() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: x0.len(),
        });
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("x0"));
    }
    let beta = config.step_beta;
    let tol = config.tolerance();
    let mut state = OptimizerState::new(oracle, x0.clone(), config.depth);
    let initial_value = oracle.value(x0);
    let initial_grad_norm = stationarity(oracle, x0, &state.grad, beta);
    let mut trace = RunTrace {
        method: config.method,
        status: RunStatus::MaxIterations,
        initial_value,
        initial_grad_norm,
        records: Vec::with_capacity(config.max_iters.min(1 << 16)),
        final_x: x0.clone(),
        iterates: Vec::new(),
    };
    if options.keep_iterates {
        trace.iterates.push(x0.clone());
    }
    if !initial_value.is_finite() || !initial_grad_norm.is_finite() {
        trace.status = RunStatus::Diverged;
        return Ok(trace);
    }
    if tol.is_some_and(|t| initial_grad_norm <= t) {
        trace.status = RunStatus::Converged;
        return Ok(trace);
    }

    for _ in 0..config.max_iters {
        let started = options.record_timing.then(Instant::now);
        let diagnostics = match step(&mut state, oracle, config) {
            Ok(d) => d,
            Err(Error::Diverged { .. }) => {
                trace.status = RunStatus::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };
        let wall_nanos = started.map_or(0, |s| s.elapsed().as_nanos() as u64);
        let f_value = oracle.value(&state.x);
        let grad_norm = stationarity(oracle, &state.x, &state.grad, beta);
        if !f_value.is_finite() || !grad_norm.is_finite() || state.x.norm() > DIVERGENCE_NORM {
            trace.status = RunStatus::Diverged;
            break;
        }
        trace.records.push(IterationRecord {
            k: state.k,
            f_value,
            grad_norm,
            diagnostics,
            wall_nanos,
        });
        trace.final_x.copy_from(&state.x);
        if options.keep_iterates {
            trace.iterates.push(state.x.clone());
        }
        if tol.is_some_and(|t| grad_norm <= t) {
            trace.status = RunStatus::Converged;
            break;
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// One flag per record: `true` when `c_k >= (M_{k+1} - M_k) / (2 sqrt(h))`
    /// is violated. Records without a successor pair are never flagged.
    pub violations: Vec<bool>,
    /// Number of consecutive diagnostic pairs that were checked.
    pub checked: usize,
}

impl StabilityReport {
    pub fn violation_count(&self) -> usize {
        self.violations.iter().filter(|v| **v).count()
    }

    pub fn violation_fraction(&self) -> f64 {
        if self.checked == 0 {
            0.0
        } else {
            self.violation_count() as f64 / self.checked as f64
        }
    }
}

/// Discrete energy-dissipation condition along an Anderson-family trace.
pub fn stability_check(records: &[IterationRecord], h: f64) -> StabilityReport {
    let mut violations = vec![false; records.len()];
    let mut checked = 0;
    let scale = 2.0 * h.sqrt();
    for (i, pair) in records.windows(2).enumerate() {
        if let (Some(now), Some(next)) = (pair[0].diagnostics, pair[1].diagnostics) {
            checked += 1;
            let required = (next.effective_mass - now.effective_mass) / scale;
            let slack = 1e-12 * (1.0 + required.abs());
            violations[i] = now.damping < required - slack;
        }
    }
    StabilityReport { violations, checked }
}
