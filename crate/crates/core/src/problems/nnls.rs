use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{project_nonnegative, Oracle, ProblemMetadata};
use crate::error::{Error, Result};

/// Parameters of the synthetic ill-conditioned nonnegative least-squares problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NnlsSpec {
    pub samples: usize,
    pub features: usize,
    pub mu: f64,
    /// Fraction of nonzero coordinates in the planted solution.
    pub sparsity: f64,
    pub noise_sigma: f64,
    /// Singular values of `A / sqrt(samples)` are log-spaced over this range.
    pub singular_range: (f64, f64),
    pub seed: u64,
}

impl Default for NnlsSpec {
    fn default() -> Self {
        NnlsSpec {
            samples: 2000,
            features: 500,
            mu: 5e-4,
            sparsity: 0.005,
            noise_sigma: 0.5,
            singular_range: (1e-4, 1.0),
            seed: 0,
        }
    }
}

impl NnlsSpec {
    fn validate(&self) -> Result<()> {
        if self.features == 0 || self.samples < self.features {
            return Err(Error::invalid(
                "samples",
                format!(
                    "need samples >= features >= 1, got {} x {}",
                    self.samples, self.features
                ),
            ));
        }
        if !(self.sparsity > 0.0 && self.sparsity < 1.0) {
            return Err(Error::invalid(
                "sparsity",
                format!("must lie in (0, 1), got {}", self.sparsity),
            ));
        }
        let (lo, hi) = self.singular_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::invalid(
                "singular_range",
                format!("need 0 < low <= high, got ({lo}, {hi})"),
            ));
        }
        if !(self.mu >= 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("mu", "mu and noise_sigma must be nonnegative"));
        }
        Ok(())
    }
}

/// `f(x) = 1/(2M) |Ax - b|^2 + mu |x|^2` subject to `x >= 0`.
///
/// `A = U S V^T` is never stored; the oracle keeps the Gram form
/// `G = A^T A / M`, `c = A^T b / M` and `|b|^2 / (2M)`.
#[derive(Debug, Clone)]
pub struct Nnls {
    gram: DMatrix<f64>,
    linear: DVector<f64>,
    offset: f64,
    mu: f64,
    singular_values: DVector<f64>,
    ground_truth: DVector<f64>,
    meta: ProblemMetadata,
}

// Haar-distributed orthonormal columns: QR of a Gaussian matrix with the
// signs of diag(R) folded into Q.
fn random_orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

impl Nnls {
    pub fn generate(spec: &NnlsSpec) -> Result<Self> {
        spec.validate()?;
        let (m, n) = (spec.samples, spec.features);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let u = random_orthonormal(m, n, &mut rng);
        let v = random_orthonormal(n, n, &mut rng);

        let (lo, hi) = spec.singular_range;
        let scale = (m as f64).sqrt();
        let singular_values = DVector::from_fn(n, |i, _| {
            let frac = if n == 1 { 1.0 } else { i as f64 / (n - 1) as f64 };
            scale * 10f64.powf(hi.log10() + frac * (lo.log10() - hi.log10()))
        });

        let support = ((spec.sparsity * n as f64).round() as usize).clamp(1, n);
        let mut ground_truth = DVector::zeros(n);
        for idx in sample(&mut rng, n, support) {
            ground_truth[idx] = rng.gen_range(1.0..=2.0);
        }

        // b = U S V^T x_true + noise
        let coords = (v.tr_mul(&ground_truth)).component_mul(&singular_values);
        let noise = DVector::from_fn(m, |_, _| spec.noise_sigma * rng.sample::<f64, _>(StandardNormal));
        let b = &u * &coords + noise;

        let mf = m as f64;
        let sq = singular_values.map(|s| s * s / mf);
        let gram = &v * DMatrix::from_diagonal(&sq) * v.transpose();
        let gram = (&gram + gram.transpose()) * 0.5;
        let linear = &v * u.tr_mul(&b).component_mul(&singular_values) / mf;
        let offset = b.norm_squared() / (2.0 * mf);

        let meta = ProblemMetadata {
            lipschitz: Some(sq.max() + 2.0 * spec.mu),
            strong_convexity: Some(sq.min() + 2.0 * spec.mu),
            hessian_lipschitz: Some(0.0),
            min_value: None,
        };
        Ok(Nnls {
            gram,
            linear,
            offset,
            mu: spec.mu,
            singular_values,
            ground_truth,
            meta,
        })
    }

    /// The planted sparse solution used to synthesize `b`.
    pub fn ground_truth(&self) -> &DVector<f64> {
        &self.ground_truth
    }

    /// Singular values of the design matrix `A`, largest first.
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }
}

impl Oracle for Nnls {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.gram * x)) - self.linear.dot(x) + self.offset + self.mu * x.norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.gram * x - &self.linear + x * (2.0 * self.mu)
    }

    fn hvp(&self, _x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        &self.gram * v + v * (2.0 * self.mu)
    }

    fn project(&self, x: DVector<f64>) -> DVector<f64> {
        project_nonnegative(x)
    }

    fn is_constrained(&self) -> bool {
        true
    }

    fn metadata(&self) -> ProblemMetadata {
        self.meta
    }
}
