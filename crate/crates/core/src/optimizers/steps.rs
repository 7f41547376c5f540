use nalgebra::DVector;

use super::guard::{energy_guard, enforce_mass_bounds};
use super::{Method, OptimizerConfig, OptimizerState};
use crate::error::{Error, Result};
use crate::mixing::{
    consistency_deviation, effective_mass, gain_factor, solve_type2, theta_to_gamma, MomentumCoefficients,
    StepDiagnostics,
};
use crate::problems::Oracle;

fn check_finite(v: &DVector<f64>, k: usize, reason: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged { k, reason })
    }
}

/// Move the state to `x_new`, evaluating the gradient there.
fn commit(state: &mut OptimizerState, oracle: &dyn Oracle, x_new: DVector<f64>) -> Result<()> {
    check_finite(&x_new, state.k + 1, "non-finite iterate")?;
    let grad_new = oracle.gradient(&x_new);
    check_finite(&grad_new, state.k + 1, "non-finite gradient")?;
    state.x_prev = Some(std::mem::replace(&mut state.x, x_new));
    state.grad_prev = Some(std::mem::replace(&mut state.grad, grad_new));
    state.k += 1;
    Ok(())
}

pub fn gd_step(state: &mut OptimizerState, oracle: &dyn Oracle, beta: f64) -> Result<()> {
    check_finite(&state.grad, state.k, "non-finite gradient")?;
    let x_new = oracle.project(&state.x - &state.grad * beta);
    commit(state, oracle, x_new)
}

/// Nesterov step: extrapolate with `(t_{k-1} - 1) / t_k`, then take a gradient
/// step at the extrapolated point.
pub fn nag_step(state: &mut OptimizerState, oracle: &dyn Oracle, beta: f64) -> Result<()> {
    let t = state.nag_t;
    let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
    let momentum = (t - 1.0) / t_next;
    let y = match &state.x_prev {
        Some(prev) if momentum != 0.0 => &state.x + (&state.x - prev) * momentum,
        _ => state.x.clone(),
    };
    let grad_y = if momentum == 0.0 {
        state.grad.clone()
    } else {
        oracle.gradient(&y)
    };
    check_finite(&grad_y, state.k, "non-finite gradient")?;
    let x_new = oracle.project(y - grad_y * beta);
    commit(state, oracle, x_new)?;
    state.nag_t = t_next;
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Form {
    Raw,
    Momentum,
    Guarded,
}

fn momentum_sum(state: &OptimizerState, y: &DVector<f64>, gamma: &MomentumCoefficients) -> Result<DVector<f64>> {
    let mut out = y.clone();
    for (idx, &g) in gamma.gamma.iter().enumerate() {
        if g != 0.0 {
            let lagged = state.history.lagged_y(idx + 1)?;
            out.axpy(g, &(y - lagged), 1.0);
        }
    }
    Ok(out)
}

fn anderson_step(
    state: &mut OptimizerState,
    oracle: &dyn Oracle,
    cfg: &OptimizerConfig,
    form: Form,
) -> Result<Option<StepDiagnostics>> {
    let beta = cfg.step_beta;
    let k = state.k;
    check_finite(&state.grad, k, "non-finite gradient")?;
    let y = oracle.project(&state.x - &state.grad * beta);
    let r = &y - &state.x;
    state.history.push(state.x.clone(), r.clone(), y.clone())?;
    if state.history.effective_depth() == 0 {
        commit(state, oracle, y)?;
        return Ok(None);
    }

    let (dx, dr) = state.history.difference_matrices()?;
    let lambda = cfg.lambda.resolve(&dr);
    let theta = match solve_type2(&r, &dr, lambda) {
        Ok(mix) => mix.theta,
        Err(Error::NonFinite(_)) => {
            return Err(Error::Diverged {
                k,
                reason: "non-finite mixing solve",
            })
        }
        Err(e) => return Err(e),
    };
    let raw_gamma = theta_to_gamma(&theta);
    let m_prev = state.mass_prev;

    let (x_new, gamma, rho) = match form {
        Form::Raw => {
            let x_new = &y - (&dx + &dr) * &theta;
            (oracle.project(x_new), raw_gamma, 1.0)
        }
        Form::Momentum => {
            let x_new = momentum_sum(state, &y, &raw_gamma)?;
            (oracle.project(x_new), raw_gamma, 1.0)
        }
        Form::Guarded => {
            let m_curr = effective_mass(&raw_gamma);
            let threshold = cfg.guard_threshold();
            let (rho, _) = energy_guard(m_curr, m_prev, threshold);
            let mut rho = enforce_mass_bounds(rho, m_curr, m_prev, threshold, cfg.mass_floor);
            let mut gamma = raw_gamma.scaled(rho);
            // Rounding in the rescaled sum can leave the mass a few ulps under the floor.
            for _ in 0..64 {
                if effective_mass(&gamma) >= cfg.mass_floor {
                    break;
                }
                rho *= 1.0 - 1e-12;
                gamma = raw_gamma.scaled(rho);
            }
            let mut x_new = momentum_sum(state, &y, &gamma)?;
            if cfg.eta > 0.0 {
                if let Some(grad_prev) = &state.grad_prev {
                    x_new.axpy(
                        -cfg.eta * cfg.damping_scale.factor(beta),
                        &(&state.grad - grad_prev),
                        1.0,
                    );
                }
            }
            (oracle.project(x_new), gamma, rho)
        }
    };

    let mass = effective_mass(&gamma);
    let consistency = consistency_deviation(&gamma, beta)?;
    let gain = match gain_factor(&state.grad, &dr, lambda) {
        Ok(g) => g,
        Err(Error::Converged) => 0.0,
        Err(Error::NonFinite(_)) => {
            return Err(Error::Diverged {
                k,
                reason: "non-finite gradient",
            })
        }
        Err(e) => return Err(e),
    };
    let grad_norm = state.grad.norm();
    let step_len = (&x_new - &state.x).norm();
    state.mass_prev = mass;
    commit(state, oracle, x_new)?;

    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    Ok(Some(StepDiagnostics {
        effective_mass: mass,
        delta_mass: mass - m_prev,
        guard_rho: rho,
        consistency_sum: consistency.sum,
        damping: consistency.damping,
        gain,
        realized_contraction: ratio(state.grad.norm(), grad_norm),
        displacement_ratio: ratio(step_len, beta * mass * grad_norm),
    }))
}

/// Raw Type-II Anderson update; plain GD while the history holds one entry.
pub fn aa2_step(
    state: &mut OptimizerState,
    oracle: &dyn Oracle,
    cfg: &OptimizerConfig,
) -> Result<Option<StepDiagnostics>> {
    anderson_step(state, oracle, cfg, Form::Raw)
}

/// Anderson update assembled as `y_{k+1} + sum_j gamma_j (y_{k+1} - y_{k-j+1})`.
pub fn aa_momentum_step(
    state: &mut OptimizerState,
    oracle: &dyn Oracle,
    cfg: &OptimizerConfig,
) -> Result<Option<StepDiagnostics>> {
    anderson_step(state, oracle, cfg, Form::Momentum)
}

/// Energy-guarded step: momentum form with the mass guard, gradient-difference
/// damping and the projector applied last.
pub fn egaa_step(
    state: &mut OptimizerState,
    oracle: &dyn Oracle,
    cfg: &OptimizerConfig,
) -> Result<Option<StepDiagnostics>> {
    anderson_step(state, oracle, cfg, Form::Guarded)
}

pub fn step(state: &mut OptimizerState, oracle: &dyn Oracle, cfg: &OptimizerConfig) -> Result<Option<StepDiagnostics>> {
    match cfg.method {
        Method::Gd => gd_step(state, oracle, cfg.step_beta).map(|_| None),
        Method::Nag => nag_step(state, oracle, cfg.step_beta).map(|_| None),
        Method::Aa2 => aa2_step(state, oracle, cfg),
        Method::AaMomentum => aa_momentum_step(state, oracle, cfg),
        Method::Egaa => egaa_step(state, oracle, cfg),
    }
}
