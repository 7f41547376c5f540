#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;

use egaa_core::bench::{self, ExperimentSpec, HarnessOptions};
use egaa_core::ode::{self, OdeConfig, OdeKind};
use egaa_core::optimizers::{read_iterates_csv, read_trace_csv};
use egaa_core::problems::ProblemConfig;

#[derive(Parser)]
#[command(name = "egaa", version, about = "Energy-guarded Anderson acceleration experiments")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the data and starting-point seeds of every experiment.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment described by a JSON file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        harness: HarnessFlags,
    },
    /// Run builtin experiment families.
    Bench {
        /// rosenbrock, logistic, nnls, quadratic or all.
        #[arg(long, default_value = "all")]
        family: String,
        #[command(flatten)]
        harness: HarnessFlags,
    },
    /// Integrate one of the continuous-time models and write its trajectory.
    Ode {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare a discrete trace with the variable-mass model built from its own diagnostics.
    Compare {
        #[arg(long)]
        trace: PathBuf,
        /// Step size of the run that produced the trace.
        #[arg(long)]
        h: f64,
        /// Problem JSON of the run.
        #[arg(long)]
        problem: PathBuf,
        /// Iterates CSV; defaults to `<trace stem>.iterates.csv`.
        #[arg(long)]
        iterates: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "vm")]
        kind: KindArg,
        /// Integrator step; defaults to min(1e-3, sqrt(h) / 10).
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        mass_floor: f64,
    },
}

#[derive(clap::Args)]
struct HarnessFlags {
    /// Fill the wall_nanos column (output is then no longer reproducible).
    #[arg(long)]
    record_timing: bool,
    /// Also write every iterate to `<label>.iterates.csv`.
    #[arg(long)]
    write_iterates: bool,
}

impl From<&HarnessFlags> for HarnessOptions {
    fn from(f: &HarnessFlags) -> Self {
        HarnessOptions {
            record_timing: f.record_timing,
            write_iterates: f.write_iterates,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Avd,
    Vm,
    Ishd,
}

impl From<KindArg> for OdeKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Avd => OdeKind::Avd,
            KindArg::Vm => OdeKind::Vm,
            KindArg::Ishd => OdeKind::Ishd,
        }
    }
}

enum Outcome {
    Ok,
    AllDiverged,
}

fn report(outcomes: &[bench::ExperimentOutcome]) -> Outcome {
    for o in outcomes {
        for s in &o.summary {
            let tol = s.iters_to_tol.map_or("-".to_string(), |k| k.to_string());
            println!(
                "{:<24} {:<18} {:?} iters_to_tol={} final_grad_norm={:e}",
                o.name, s.label, s.status, tol, s.final_grad_norm
            );
        }
    }
    if !outcomes.is_empty() && outcomes.iter().all(|o| o.all_diverged()) {
        Outcome::AllDiverged
    } else {
        Outcome::Ok
    }
}

#[derive(Serialize)]
struct Comparison {
    h: f64,
    kind: OdeKind,
    iterations: usize,
    deviation: f64,
    ode_diverged: bool,
}

fn execute(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Run { config, harness } => {
            let mut spec: ExperimentSpec = bench::read_json(&config)?;
            if let Some(seed) = cli.seed {
                spec = spec.with_seed(seed);
            }
            if let Some(out) = &cli.out {
                spec = spec.with_output_dir(out);
            }
            let outcome = bench::run_experiment(&spec, (&harness).into())?;
            Ok(report(&[outcome]))
        }
        Command::Bench { family, harness } => {
            let families = if family == "all" {
                bench::builtin_experiments()
            } else {
                match bench::family(&family) {
                    Some(f) => vec![f],
                    None => bail!(
                        "unknown family `{family}`, expected one of {:?} or all",
                        bench::FAMILY_NAMES
                    ),
                }
            };
            let root = cli.out.unwrap_or_else(|| PathBuf::from("results"));
            let mut outcomes = Vec::new();
            for mut fam in families {
                for spec in &mut fam.experiments {
                    let mut s = spec.with_output_dir(root.join(&fam.name));
                    if let Some(seed) = cli.seed {
                        s = s.with_seed(seed);
                    }
                    *spec = s;
                }
                outcomes.extend(bench::run_family(&fam, (&harness).into())?);
            }
            Ok(report(&outcomes))
        }
        Command::Ode { kind, config } => {
            let mut cfg = match &config {
                Some(path) => bench::read_json::<OdeConfig>(path)?,
                None => OdeConfig::default(),
            };
            if let Some(seed) = cli.seed {
                cfg.problem = cfg.problem.with_seed(seed);
            }
            let kind = OdeKind::from(kind);
            let traj = cfg.integrate(kind)?;
            let dir = cli.out.unwrap_or_else(|| PathBuf::from("results").join("ode"));
            create_dir(&dir)?;
            let name = match kind {
                OdeKind::Avd => "avd",
                OdeKind::Vm => "vm",
                OdeKind::Ishd => "ishd",
            };
            let path = dir.join(format!("trajectory_{name}.csv"));
            ode::write_trajectory_csv(&path, &traj.states)?;
            println!("{} states written to {}", traj.states.len(), path.display());
            Ok(if traj.diverged {
                Outcome::AllDiverged
            } else {
                Outcome::Ok
            })
        }
        Command::Compare {
            trace,
            h,
            problem,
            iterates,
            kind,
            dt,
            mass_floor,
        } => {
            if !(h > 0.0) {
                bail!("--h must be positive, got {h}");
            }
            let rows = read_trace_csv(&trace)?;
            let iterates_path = iterates.unwrap_or_else(|| sidecar(&trace));
            let xs = read_iterates_csv(&iterates_path)?;
            if xs.len() < 2 {
                bail!("{}: need at least two iterates", iterates_path.display());
            }
            let mut problem: ProblemConfig = bench::read_json(&problem)?;
            if let Some(seed) = cli.seed {
                problem = problem.with_seed(seed);
            }
            let oracle = problem.build()?;
            let sqrt_h = h.sqrt();
            let dt = dt.unwrap_or((sqrt_h / 10.0).min(1e-3));
            let t_end = (xs.len() - 1) as f64 * sqrt_h;
            let v0 = DVector::zeros(xs[0].len());
            let kind = OdeKind::from(kind);
            let traj = match kind {
                OdeKind::Avd => ode::integrate_avd(oracle.as_ref(), &xs[0], sqrt_h, t_end, dt)?,
                OdeKind::Vm => {
                    let schedules = ode::schedules_from_trace(&rows, h, mass_floor)?;
                    ode::integrate_variable_mass(oracle.as_ref(), &schedules, &xs[0], &v0, sqrt_h, t_end, dt)?
                }
                OdeKind::Ishd => {
                    let schedules = ode::schedules_from_trace(&rows, h, mass_floor)?;
                    ode::integrate_ishd(oracle.as_ref(), &schedules, &xs[0], &v0, sqrt_h, t_end, dt)?
                }
            };
            let deviation = if traj.diverged {
                f64::INFINITY
            } else {
                ode::discrete_vs_ode_deviation(&xs, &traj.states, h)?
            };
            let result = Comparison {
                h,
                kind,
                iterations: xs.len() - 1,
                deviation,
                ode_diverged: traj.diverged,
            };
            println!("deviation {deviation:e} over {} iterations", result.iterations);
            let dir = cli.out.unwrap_or_else(|| PathBuf::from("."));
            create_dir(&dir)?;
            let text = serde_json::to_string_pretty(&result)?;
            let path = dir.join("compare.json");
            std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
            Ok(if traj.diverged {
                Outcome::AllDiverged
            } else {
                Outcome::Ok
            })
        }
    }
}

fn sidecar(trace: &Path) -> PathBuf {
    let stem = trace.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    trace.with_file_name(format!("{stem}.iterates.csv"))
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::AllDiverged) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
