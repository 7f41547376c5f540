use nalgebra::{DMatrix, DVector};

use super::{Oracle, ProblemMetadata};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Hessian {
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

/// `f(x) = 1/2 x^T A x - b^T x` with symmetric positive semidefinite `A`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    hessian: Hessian,
    linear: DVector<f64>,
    meta: ProblemMetadata,
}

impl Quadratic {
    /// Diagonal `A` with `n` eigenvalues linearly spaced in `[1, kappa]`, `b = 0`.
    pub fn uniform_spectrum(n: usize, kappa: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "dimension must be at least 1"));
        }
        if !(kappa >= 1.0) || !kappa.is_finite() {
            return Err(Error::invalid("kappa", format!("must be finite and >= 1, got {kappa}")));
        }
        let eigs = if n == 1 {
            DVector::from_element(1, 1.0)
        } else {
            DVector::from_fn(n, |i, _| 1.0 + (kappa - 1.0) * i as f64 / (n - 1) as f64)
        };
        Self::diagonal(eigs)
    }

    /// Diagonal `A` with the given nonnegative entries, `b = 0`.
    pub fn diagonal(eigenvalues: DVector<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::invalid("eigenvalues", "empty spectrum"));
        }
        if eigenvalues.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::invalid("eigenvalues", "entries must be finite and nonnegative"));
        }
        let l = eigenvalues.max();
        let mu = eigenvalues.min();
        let n = eigenvalues.len();
        Ok(Quadratic {
            hessian: Hessian::Diagonal(eigenvalues),
            linear: DVector::zeros(n),
            meta: ProblemMetadata {
                lipschitz: Some(l),
                strong_convexity: Some(mu),
                hessian_lipschitz: Some(0.0),
                min_value: Some(0.0),
            },
        })
    }

    /// Dense symmetric positive definite `A` and linear term `b`.
    pub fn dense(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() != b.len() || b.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        let asym = (&a - a.transpose()).amax();
        if asym > 1e-12 * a.amax().max(1.0) {
            return Err(Error::invalid("a", "matrix is not symmetric"));
        }
        let eig = a.clone().symmetric_eigen();
        let (l, mu) = (eig.eigenvalues.max(), eig.eigenvalues.min());
        if mu <= 0.0 {
            return Err(Error::invalid("a", "matrix is not positive definite"));
        }
        let xstar = a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::invalid("a", "Cholesky factorization failed"))?
            .solve(&b);
        let fstar = -0.5 * b.dot(&xstar);
        Ok(Quadratic {
            hessian: Hessian::Dense(a),
            linear: b,
            meta: ProblemMetadata {
                lipschitz: Some(l),
                strong_convexity: Some(mu),
                hessian_lipschitz: Some(0.0),
                min_value: Some(fstar),
            },
        })
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.hessian {
            Hessian::Diagonal(d) => d.component_mul(v),
            Hessian::Dense(a) => a * v,
        }
    }
}

impl Oracle for Quadratic {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&self.apply(x)) - self.linear.dot(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.apply(x) - &self.linear
    }

    fn hvp(&self, _x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.apply(v)
    }

    fn metadata(&self) -> ProblemMetadata {
        self.meta
    }
}
