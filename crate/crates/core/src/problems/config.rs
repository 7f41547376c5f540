use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Logistic, Nnls, NnlsSpec, Oracle, Quadratic, Rosenbrock};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Uniform,
}

/// JSON-serializable description of a problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    Quadratic {
        n: usize,
        kappa: f64,
        #[serde(default)]
        spacing: Spacing,
    },
    Rosenbrock {
        a: f64,
    },
    Logistic {
        samples: usize,
        features: usize,
        mu: f64,
        seed: u64,
    },
    Nnls(NnlsSpec),
}

impl ProblemConfig {
    pub fn build(&self) -> Result<Arc<dyn Oracle>> {
        Ok(match self {
            ProblemConfig::Quadratic { n, kappa, spacing } => match spacing {
                Spacing::Uniform => Arc::new(Quadratic::uniform_spectrum(*n, *kappa)?),
            },
            ProblemConfig::Rosenbrock { a } => Arc::new(Rosenbrock::new(*a)?),
            ProblemConfig::Logistic {
                samples,
                features,
                mu,
                seed,
            } => Arc::new(Logistic::synthetic(*samples, *features, *mu, *seed)?),
            ProblemConfig::Nnls(spec) => Arc::new(Nnls::generate(spec)?),
        })
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ProblemConfig::Logistic { seed, .. } => Some(*seed),
            ProblemConfig::Nnls(spec) => Some(spec.seed),
            _ => None,
        }
    }

    /// Replace the data-generation seed, if the problem has one.
    pub fn with_seed(mut self, new_seed: u64) -> Self {
        match &mut self {
            ProblemConfig::Logistic { seed, .. } => *seed = new_seed,
            ProblemConfig::Nnls(spec) => spec.seed = new_seed,
            _ => {}
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let cfg: ProblemConfig = serde_json::from_str(r#"{"kind":"quadratic","n":3,"kappa":3.0}"#).unwrap();
        assert_eq!(
            cfg,
            ProblemConfig::Quadratic {
                n: 3,
                kappa: 3.0,
                spacing: Spacing::Uniform
            }
        );
        let nnls: ProblemConfig = serde_json::from_str(r#"{"kind":"nnls","mu":5e-5,"seed":9}"#).unwrap();
        match nnls {
            ProblemConfig::Nnls(spec) => {
                assert_eq!(spec.mu, 5e-5);
                assert_eq!(spec.seed, 9);
                assert_eq!(spec.samples, 2000);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn seed_override() {
        let cfg = ProblemConfig::Logistic {
            samples: 10,
            features: 2,
            mu: 0.1,
            seed: 1,
        }
        .with_seed(42);
        assert_eq!(cfg.seed(), Some(42));
        assert_eq!(ProblemConfig::Rosenbrock { a: 1.0 }.with_seed(3).seed(), None);
    }
}
