use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Oracle, ProblemMetadata};
use crate::error::{Error, Result};

const LABEL_FLIP_RATE: f64 = 0.05;

/// L2-regularized logistic loss
/// `f(x) = (1/M) sum log(1 + exp(-y_i a_i^T x)) + (mu/2) |x|^2`.
#[derive(Debug, Clone)]
pub struct Logistic {
    features: DMatrix<f64>,
    labels: DVector<f64>,
    mu: f64,
    meta: ProblemMetadata,
}

impl Logistic {
    /// Gaussian features, labels from a planted Gaussian separator with 5% flips.
    pub fn synthetic(samples: usize, features: usize, mu: f64, seed: u64) -> Result<Self> {
        if samples == 0 || features == 0 {
            return Err(Error::invalid("samples", "samples and features must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(samples, features, |_, _| rng.sample::<f64, _>(StandardNormal));
        let planted = DVector::from_fn(features, |_, _| rng.sample::<f64, _>(StandardNormal));
        let margins = &a * &planted;
        let labels = DVector::from_fn(samples, |i, _| {
            let y = if margins[i] >= 0.0 { 1.0 } else { -1.0 };
            if rng.gen::<f64>() < LABEL_FLIP_RATE {
                -y
            } else {
                y
            }
        });
        Self::from_data(a, labels, mu)
    }

    /// Rows of `features` are samples; labels must be +-1.
    pub fn from_data(features: DMatrix<f64>, labels: DVector<f64>, mu: f64) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if !(mu >= 0.0) {
            return Err(Error::invalid("mu", format!("must be nonnegative, got {mu}")));
        }
        if labels.iter().any(|y| y.abs() != 1.0) {
            return Err(Error::invalid("labels", "labels must be +1 or -1"));
        }
        let gram = features.transpose() * &features;
        let spectral_sq = gram.symmetric_eigenvalues().max();
        let samples = features.nrows() as f64;
        let meta = ProblemMetadata {
            lipschitz: Some(spectral_sq / (4.0 * samples) + mu),
            strong_convexity: Some(mu),
            hessian_lipschitz: None,
            min_value: None,
        };
        Ok(Logistic {
            features,
            labels,
            mu,
            meta,
        })
    }

    fn signed_margins(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.features * x).component_mul(&self.labels)
    }
}

// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Oracle for Logistic {
    fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let m = self.features.nrows() as f64;
        let loss: f64 = self.signed_margins(x).iter().map(|&z| softplus(-z)).sum();
        loss / m + 0.5 * self.mu * x.norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let m = self.features.nrows() as f64;
        let weights = self
            .signed_margins(x)
            .zip_map(&self.labels, |z, y| -y * sigmoid(-z) / m);
        self.features.tr_mul(&weights) + x * self.mu
    }

    fn metadata(&self) -> ProblemMetadata {
        self.meta
    }
}
