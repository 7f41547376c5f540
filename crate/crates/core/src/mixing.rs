//! Anderson mixing coefficients and their momentum-form counterparts.
//!
//! The Type-II least-squares problem `min |r_k - R_k theta|^2 + lambda |theta|^2`
//! is solved through a thin SVD of `R_k`. With `lambda = 0` singular values below
//! the usual rank tolerance are discarded, which yields the minimum-norm solution.
//!
//! Coefficient ordering follows the columns of `R_k` (oldest first): `theta[0]`
//! multiplies the oldest difference. Momentum coefficients are indexed by lag:
//! `gamma[0]` multiplies `y_{k+1} - y_k`, `gamma[j-1]` multiplies
//! `y_{k+1} - y_{k-j+1}`.

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative Tikhonov weight: `lambda = 1e-10 * |R^T R|_2`.
pub const DEFAULT_RELATIVE_LAMBDA: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MixingCoefficients {
    pub theta: DVector<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumCoefficients {
    pub gamma: DVector<f64>,
}

impl MomentumCoefficients {
    pub fn depth(&self) -> usize {
        self.gamma.len()
    }

    pub fn scaled(&self, rho: f64) -> Self {
        MomentumCoefficients {
            gamma: &self.gamma * rho,
        }
    }
}

/// Tikhonov weight for the mixing solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum Regularization {
    /// `lambda = value * |R^T R|_2`.
    Relative(f64),
    Absolute(f64),
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::Relative(DEFAULT_RELATIVE_LAMBDA)
    }
}

impl Regularization {
    pub fn resolve(&self, r_mat: &DMatrix<f64>) -> f64 {
        match *self {
            Regularization::Absolute(l) => l,
            Regularization::Relative(scale) => {
                if r_mat.is_empty() {
                    0.0
                } else {
                    // |R^T R|_2 = sigma_max(R)^2
                    let s = r_mat.singular_values();
                    scale * s.max().powi(2)
                }
            }
        }
    }
}

/// Per-step record of the mass, guard and projection diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// `1/2 (1 + sum j^2 gamma_j)` for the coefficients actually applied.
    pub effective_mass: f64,
    /// Applied mass minus the previous applied mass.
    pub delta_mass: f64,
    /// Guard scaling factor; 1 when the guard did not fire.
    pub guard_rho: f64,
    /// `sum j gamma_j`.
    pub consistency_sum: f64,
    /// `(1 - sum j gamma_j) / sqrt(beta)`.
    pub damping: f64,
    /// `|Pi_k grad| / |grad|`.
    pub gain: f64,
    /// `|grad f(x_{k+1})| / |grad f(x_k)|`.
    pub realized_contraction: f64,
    /// `|x_{k+1} - x_k| / (beta * M * |grad f(x_k)|)`.
    pub displacement_ratio: f64,
}

struct Factorization {
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    cutoff: f64,
}

fn factor(a: &DMatrix<f64>) -> Result<Factorization> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares matrix"));
    }
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * smax;
    Ok(Factorization { svd, cutoff })
}

impl Factorization {
    // Spectral filter s / (s^2 + lambda), or 1/s above the rank cutoff when lambda = 0.
    fn solve_filter(&self, s: f64, lambda: f64) -> f64 {
        if lambda > 0.0 {
            s / (s * s + lambda)
        } else if s > self.cutoff && s > 0.0 {
            1.0 / s
        } else {
            0.0
        }
    }

    // Projection weight s^2 / (s^2 + lambda) onto each left singular vector.
    fn projection_filter(&self, s: f64, lambda: f64) -> f64 {
        if lambda > 0.0 {
            s * s / (s * s + lambda)
        } else if s > self.cutoff && s > 0.0 {
            1.0
        } else {
            0.0
        }
    }

    fn u(&self) -> &DMatrix<f64> {
        self.svd.u.as_ref().expect("U requested")
    }

    fn v_t(&self) -> &DMatrix<f64> {
        self.svd.v_t.as_ref().expect("V^T requested")
    }
}

fn regularized_least_squares(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> Result<MixingCoefficients> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(
            "lambda",
            format!("must be finite and nonnegative, got {lambda}"),
        ));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares target"));
    }
    if a.ncols() == 0 {
        return Ok(MixingCoefficients {
            theta: DVector::zeros(0),
            lambda,
        });
    }
    let f = factor(a)?;
    let mut coeffs = f.u().tr_mul(b);
    for (c, &s) in coeffs.iter_mut().zip(f.svd.singular_values.iter()) {
        *c *= f.solve_filter(s, lambda);
    }
    Ok(MixingCoefficients {
        theta: f.v_t().tr_mul(&coeffs),
        lambda,
    })
}

/// Type-II mixing: `argmin |r_k - R_k theta|^2 + lambda |theta|^2`.
pub fn solve_type2(residual: &DVector<f64>, r_mat: &DMatrix<f64>, lambda: f64) -> Result<MixingCoefficients> {
    regularized_least_squares(r_mat, residual, lambda)
}

/// Type-I mixing: `argmin |target - X_k theta|^2 + lambda |theta|^2`.
///
/// The increment `x_{k+1} - x_k` is not known when the solve happens, so callers
/// normally pass the current residual `r_k` as the target.
pub fn solve_type1(target: &DVector<f64>, x_mat: &DMatrix<f64>, lambda: f64) -> Result<MixingCoefficients> {
    regularized_least_squares(x_mat, target, lambda)
}

/// `gamma_j = theta_{m-j} - theta_{m-j+1}` with `theta_0 = theta_{m+1} = 0` (1-based).
pub fn theta_to_gamma(theta: &DVector<f64>) -> MomentumCoefficients {
    let m = theta.len();
    // 1-based accessor with zero boundary values.
    let th = |i: usize| if i == 0 || i > m { 0.0 } else { theta[i - 1] };
    MomentumCoefficients {
        gamma: DVector::from_fn(m, |row, _| {
            let j = row + 1;
            th(m - j) - th(m - j + 1)
        }),
    }
}

/// Inverse of [`theta_to_gamma`]: `theta_{m-i+1} = -sum_{j >= i} gamma_j`.
pub fn gamma_to_theta(gamma: &MomentumCoefficients) -> MixingCoefficients {
    let m = gamma.depth();
    let mut theta = DVector::zeros(m);
    let mut tail = 0.0;
    for i in (1..=m).rev() {
        tail += gamma.gamma[i - 1];
        theta[m - i] = -tail;
    }
    MixingCoefficients { theta, lambda: 0.0 }
}

/// `1/2 (1 + sum_j j^2 gamma_j)`.
pub fn effective_mass(gamma: &MomentumCoefficients) -> f64 {
    0.5 * (1.0 + second_moment(gamma))
}

pub(crate) fn second_moment(gamma: &MomentumCoefficients) -> f64 {
    gamma
        .gamma
        .iter()
        .enumerate()
        .map(|(i, g)| ((i + 1) * (i + 1)) as f64 * g)
        .sum()
}

/// `sum_j j gamma_j`.
pub fn consistency_sum(gamma: &MomentumCoefficients) -> f64 {
    gamma.gamma.iter().enumerate().map(|(i, g)| (i + 1) as f64 * g).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyDeviation {
    pub sum: f64,
    /// `(1 - sum) / sqrt(h)`.
    pub damping: f64,
}

pub fn consistency_deviation(gamma: &MomentumCoefficients, h: f64) -> Result<ConsistencyDeviation> {
    if !(h > 0.0) {
        return Err(Error::invalid("h", format!("must be positive, got {h}")));
    }
    let sum = consistency_sum(gamma);
    Ok(ConsistencyDeviation {
        sum,
        damping: (1.0 - sum) / h.sqrt(),
    })
}

/// `|Pi grad| / |grad|` with `Pi = I - R (R^T R + lambda I)^{-1} R^T`, applied
/// through the SVD of `R` so the `n x n` operator is never formed.
pub fn gain_factor(grad: &DVector<f64>, r_mat: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    let gnorm = grad.norm();
    if !gnorm.is_finite() {
        return Err(Error::NonFinite("gain_factor gradient"));
    }
    if gnorm == 0.0 {
        return Err(Error::Converged);
    }
    if r_mat.ncols() == 0 {
        return Ok(1.0);
    }
    if r_mat.nrows() != grad.len() {
        return Err(Error::DimensionMismatch {
            expected: r_mat.nrows(),
            got: grad.len(),
        });
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda", format!("must be nonnegative, got {lambda}")));
    }
    let f = factor(r_mat)?;
    let mut coeffs = f.u().tr_mul(grad);
    for (c, &s) in coeffs.iter_mut().zip(f.svd.singular_values.iter()) {
        *c *= f.projection_filter(s, lambda);
    }
    let projected = grad - f.u() * coeffs;
    Ok(projected.norm() / gnorm)
}
