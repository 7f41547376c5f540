//! Experiment harness: builtin experiment families, runner writing per-method
//! trace CSVs plus a JSON summary per experiment.

mod builtin;

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{
    run_with_options, stability_check, write_iterates_csv, write_trace_csv, Method, OptimizerConfig, RunOptions,
    RunStatus, RunTrace,
};
use crate::problems::{Oracle, ProblemConfig};

pub use builtin::{builtin_experiments, family, FAMILY_NAMES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum X0Policy {
    Origin,
    StandardNormal { seed: u64 },
    Explicit { values: Vec<f64> },
}

impl X0Policy {
    pub fn materialize(&self, dim: usize) -> Result<DVector<f64>> {
        match self {
            X0Policy::Origin => Ok(DVector::zeros(dim)),
            X0Policy::StandardNormal { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng)))
            }
            X0Policy::Explicit { values } => {
                if values.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: values.len(),
                    });
                }
                Ok(DVector::from_column_slice(values))
            }
        }
    }
}

/// One method of an experiment. `lipschitz_scale`, when set, replaces the
/// configured step with `lipschitz_scale / L` for the problem's `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEntry {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_scale: Option<f64>,
    pub config: OptimizerConfig,
}

impl MethodEntry {
    pub fn new(label: impl Into<String>, config: OptimizerConfig) -> Self {
        MethodEntry {
            label: label.into(),
            lipschitz_scale: None,
            config,
        }
    }

    /// Step `scale / L`; the configured `step_beta` is a placeholder until run time.
    pub fn scaled(label: impl Into<String>, scale: f64, config: OptimizerConfig) -> Self {
        MethodEntry {
            label: label.into(),
            lipschitz_scale: Some(scale),
            config,
        }
    }

    fn resolve(&self, oracle: &dyn Oracle, max_iters: usize, grad_tol: Option<f64>) -> Result<OptimizerConfig> {
        let mut cfg = self.config.clone();
        cfg.max_iters = max_iters;
        cfg.grad_tol = grad_tol;
        if let Some(scale) = self.lipschitz_scale {
            let l = oracle
                .metadata()
                .lipschitz
                .ok_or_else(|| Error::invalid("lipschitz_scale", "problem has no known Lipschitz constant"))?;
            cfg.step_beta = scale / l;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub problem: ProblemConfig,
    pub methods: Vec<MethodEntry>,
    pub x0_policy: X0Policy,
    pub max_iters: usize,
    /// `None` disables early stopping.
    pub grad_tol: Option<f64>,
    pub output_dir: PathBuf,
}

impl ExperimentSpec {
    /// Copy with the problem and starting-point seeds replaced.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut spec = self.clone();
        spec.problem = spec.problem.with_seed(seed);
        if let X0Policy::StandardNormal { seed: s } = &mut spec.x0_policy {
            *s = seed;
        }
        spec
    }

    pub fn with_output_dir(&self, dir: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            output_dir: dir.into(),
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::invalid("methods", "experiment lists no methods"));
        }
        let mut labels: Vec<&str> = self.methods.iter().map(|m| m.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("methods", "method labels must be unique"));
        }
        if labels.iter().any(|l| l.is_empty() || l.contains(['/', '\\'])) {
            return Err(Error::invalid(
                "methods",
                "labels must be nonempty file-name safe strings",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub label: String,
    pub method: Method,
    pub step_beta: f64,
    pub status: RunStatus,
    /// First iteration meeting the tolerance; `null` when it never did.
    pub iters_to_tol: Option<usize>,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub final_f: f64,
    /// Share of Anderson steps where the guard scaled the momentum (`rho < 1`).
    pub guard_fire_fraction: f64,
    pub stability_violation_fraction: f64,
}

impl SummaryRecord {
    pub fn from_trace(label: &str, cfg: &OptimizerConfig, grad_tol: Option<f64>, trace: &RunTrace) -> Self {
        let tol = grad_tol.filter(|t| t.is_finite());
        let iters_to_tol = tol.and_then(|t| {
            if trace.initial_grad_norm <= t {
                Some(0)
            } else {
                trace.records.iter().find(|r| r.grad_norm <= t).map(|r| r.k)
            }
        });
        let diags: Vec<_> = trace.records.iter().filter_map(|r| r.diagnostics).collect();
        let guard_fire_fraction = if diags.is_empty() {
            0.0
        } else {
            diags.iter().filter(|d| d.guard_rho < 1.0).count() as f64 / diags.len() as f64
        };
        SummaryRecord {
            label: label.to_string(),
            method: cfg.method,
            step_beta: cfg.step_beta,
            status: trace.status,
            iters_to_tol,
            iterations: trace.iterations(),
            final_grad_norm: trace.final_grad_norm(),
            final_f: trace.final_value(),
            guard_fire_fraction,
            stability_violation_fraction: stability_check(&trace.records, cfg.step_beta).violation_fraction(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HarnessOptions {
    pub record_timing: bool,
    /// Also write `<label>.iterates.csv` next to each trace.
    pub write_iterates: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub name: String,
    pub summary: Vec<SummaryRecord>,
    pub trace_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
}

impl ExperimentOutcome {
    pub fn all_diverged(&self) -> bool {
        self.summary.iter().all(|s| s.status == RunStatus::Diverged)
    }
}

/// Traces of every method, in spec order, without touching the file system.
pub fn run_methods(
    spec: &ExperimentSpec,
    options: RunOptions,
) -> Result<Vec<(MethodEntry, OptimizerConfig, RunTrace)>> {
    spec.validate()?;
    let oracle = spec.problem.build()?;
    let x0 = spec.x0_policy.materialize(oracle.dim())?;
    spec.methods
        .par_iter()
        .map(|entry| {
            let cfg = entry.resolve(oracle.as_ref(), spec.max_iters, spec.grad_tol)?;
            let trace = run_with_options(oracle.as_ref(), &cfg, &x0, options)?;
            Ok((entry.clone(), cfg, trace))
        })
        .collect()
}

/// Writes `<output_dir>/<name>/<label>.csv` per method and `summary.json`.
pub fn run_experiment(spec: &ExperimentSpec, options: HarnessOptions) -> Result<ExperimentOutcome> {
    let dir = spec.output_dir.join(&spec.name);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let run_opts = RunOptions {
        record_timing: options.record_timing,
        keep_iterates: options.write_iterates,
    };
    let runs = run_methods(spec, run_opts)?;
    let mut summary = Vec::with_capacity(runs.len());
    let mut trace_paths = Vec::with_capacity(runs.len());
    for (entry, cfg, trace) in &runs {
        let path = dir.join(format!("{}.csv", entry.label));
        write_trace_csv(&path, trace, options.record_timing)?;
        if options.write_iterates {
            write_iterates_csv(&dir.join(format!("{}.iterates.csv", entry.label)), &trace.iterates)?;
        }
        trace_paths.push(path);
        summary.push(SummaryRecord::from_trace(&entry.label, cfg, spec.grad_tol, trace));
    }
    let summary_path = dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    Ok(ExperimentOutcome {
        name: spec.name.clone(),
        summary,
        trace_paths,
        summary_path,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// A named group of experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentFamily {
    pub name: String,
    pub experiments: Vec<ExperimentSpec>,
}

pub fn run_family(family: &ExperimentFamily, options: HarnessOptions) -> Result<Vec<ExperimentOutcome>> {
    family
        .experiments
        .par_iter()
        .map(|spec| run_experiment(spec, options))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x0_policies() {
        assert_eq!(X0Policy::Origin.materialize(3).unwrap(), DVector::zeros(3));
        let a = X0Policy::StandardNormal { seed: 4 }.materialize(5).unwrap();
        assert_eq!(a, X0Policy::StandardNormal { seed: 4 }.materialize(5).unwrap());
        assert_ne!(a, X0Policy::StandardNormal { seed: 5 }.materialize(5).unwrap());
        assert!(X0Policy::Explicit { values: vec![1.0] }.materialize(2).is_err());
    }

    #[test]
    fn duplicate_labels_rejected() {
        let cfg = OptimizerConfig::new(Method::Gd, 0.1);
        let spec = ExperimentSpec {
            name: "dup".into(),
            problem: ProblemConfig::Rosenbrock { a: 1.0 },
            methods: vec![MethodEntry::new("gd", cfg.clone()), MethodEntry::new("gd", cfg)],
            x0_policy: X0Policy::Origin,
            max_iters: 3,
            grad_tol: None,
            output_dir: PathBuf::from("unused"),
        };
        assert!(matches!(
            run_methods(&spec, RunOptions::default()),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn seed_override_reaches_x0() {
        let spec = &family("quadratic").unwrap().experiments[0];
        let reseeded = spec.with_seed(99);
        assert_eq!(reseeded.x0_policy, X0Policy::StandardNormal { seed: 99 });
    }
}
