use std::path::PathBuf;

use super::{ExperimentFamily, ExperimentSpec, MethodEntry, X0Policy};
use crate::optimizers::{Method, OptimizerConfig};
use crate::problems::{NnlsSpec, ProblemConfig, Spacing};

pub const FAMILY_NAMES: [&str; 4] = ["rosenbrock", "logistic", "nnls", "quadratic"];

fn out(family: &str) -> PathBuf {
    PathBuf::from("results").join(family)
}

fn guarded(beta: f64, depth: usize, delta_max: f64, eta: f64) -> OptimizerConfig {
    OptimizerConfig::new(Method::Egaa, beta)
        .with_depth(depth)
        .with_guard(delta_max, eta)
}

fn rosenbrock() -> ExperimentFamily {
    let experiments = [1.0, 20.0, 100.0]
        .into_iter()
        .map(|a| {
            // Only the a = 100 case has distinct published steps.
            let (beta_gd, beta_nag, beta_aa) = if a == 100.0 {
                (1e-5, 1e-3, 1e-5)
            } else {
                (1e-3, 1e-3, 1e-3)
            };
            ExperimentSpec {
                name: format!("rosenbrock_a{a}"),
                problem: ProblemConfig::Rosenbrock { a },
                methods: vec![
                    MethodEntry::new("gd", OptimizerConfig::new(Method::Gd, beta_gd)),
                    MethodEntry::new("nag", OptimizerConfig::new(Method::Nag, beta_nag)),
                    MethodEntry::new("aa2", OptimizerConfig::new(Method::Aa2, beta_aa).with_depth(2)),
                    MethodEntry::new("egaa", guarded(beta_aa, 2, 50.0, 0.05)),
                ],
                x0_policy: X0Policy::Explicit {
                    values: vec![-1.5, 1.5],
                },
                max_iters: 20_000,
                grad_tol: Some(1e-6),
                output_dir: out("rosenbrock"),
            }
        })
        .collect();
    ExperimentFamily {
        name: "rosenbrock".into(),
        experiments,
    }
}

/// Guard limits of the logistic recovery sweep, from effectively unguarded
/// towards zero.
pub(crate) const LOGISTIC_DELTAS: [f64; 6] = [1e12, 50.0, 2.0, 0.5, 0.1, 0.01];

fn logistic() -> ExperimentFamily {
    let mut methods = vec![
        MethodEntry::scaled("gd", 1.0, OptimizerConfig::new(Method::Gd, 1.0)),
        MethodEntry::scaled("aa2", 1.0, OptimizerConfig::new(Method::Aa2, 1.0)),
    ];
    for delta in LOGISTIC_DELTAS {
        methods.push(MethodEntry::scaled(
            format!("egaa_delta_{delta:e}"),
            1.0,
            guarded(1.0, 3, delta, 1e-12),
        ));
    }
    ExperimentFamily {
        name: "logistic".into(),
        experiments: vec![ExperimentSpec {
            name: "logistic_recovery".into(),
            problem: ProblemConfig::Logistic {
                samples: 500,
                features: 100,
                mu: 1e-3,
                seed: 7,
            },
            methods,
            x0_policy: X0Policy::Origin,
            max_iters: 1000,
            grad_tol: Some(1e-8),
            output_dir: out("logistic"),
        }],
    }
}

fn nnls() -> ExperimentFamily {
    let experiments = [5e-4, 5e-5, 5e-6]
        .into_iter()
        .map(|mu| ExperimentSpec {
            name: format!("nnls_mu{mu:e}"),
            problem: ProblemConfig::Nnls(NnlsSpec {
                mu,
                ..NnlsSpec::default()
            }),
            methods: vec![
                MethodEntry::scaled("gd", 1.0, OptimizerConfig::new(Method::Gd, 1.0)),
                MethodEntry::scaled("nag", 1.0, OptimizerConfig::new(Method::Nag, 1.0)),
                MethodEntry::scaled("aa2", 1.0, OptimizerConfig::new(Method::Aa2, 1.0).with_depth(3)),
                MethodEntry::scaled("egaa", 1.0, guarded(1.0, 3, 20.0, 0.02)),
            ],
            x0_policy: X0Policy::Origin,
            max_iters: 5000,
            grad_tol: Some(1e-6),
            output_dir: out("nnls"),
        })
        .collect();
    ExperimentFamily {
        name: "nnls".into(),
        experiments,
    }
}

pub(crate) const QUADRATIC_KAPPAS: [f64; 4] = [50.0, 500.0, 5000.0, 50000.0];

fn quadratic() -> ExperimentFamily {
    let experiments = QUADRATIC_KAPPAS
        .into_iter()
        .map(|kappa| ExperimentSpec {
            name: format!("quadratic_kappa{kappa}"),
            problem: ProblemConfig::Quadratic {
                n: 100,
                kappa,
                spacing: Spacing::Uniform,
            },
            methods: vec![
                MethodEntry::scaled("gd", 1.0, OptimizerConfig::new(Method::Gd, 1.0)),
                MethodEntry::scaled("nag", 1.0, OptimizerConfig::new(Method::Nag, 1.0)),
                MethodEntry::scaled("aa2", 1.8, OptimizerConfig::new(Method::Aa2, 1.0).with_depth(3)),
                MethodEntry::scaled("egaa", 1.8, guarded(1.0, 3, 5.0, 0.1)),
            ],
            x0_policy: X0Policy::StandardNormal { seed: 1 },
            max_iters: 5000,
            grad_tol: Some(1e-6),
            output_dir: out("quadratic"),
        })
        .collect();
    ExperimentFamily {
        name: "quadratic".into(),
        experiments,
    }
}

pub fn builtin_experiments() -> Vec<ExperimentFamily> {
    vec![rosenbrock(), logistic(), nnls(), quadratic()]
}

pub fn family(name: &str) -> Option<ExperimentFamily> {
    builtin_experiments().into_iter().find(|f| f.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_named_families() {
        let names: Vec<_> = builtin_experiments().into_iter().map(|f| f.name).collect();
        assert_eq!(names, FAMILY_NAMES);
    }

    #[test]
    fn quadratic_grid() {
        let fam = family("quadratic").unwrap();
        assert_eq!(fam.experiments.len(), 4);
        assert!(fam.experiments.iter().all(|e| e.methods.len() == 4));
    }

    #[test]
    fn specs_round_trip_through_json() {
        for fam in builtin_experiments() {
            let text = serde_json::to_string(&fam).unwrap();
            let back: ExperimentFamily = serde_json::from_str(&text).unwrap();
            assert_eq!(back, fam);
        }
    }
}
