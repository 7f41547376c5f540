//! Continuous-time limits of the discrete methods: the AVD equation of
//! Nesterov's method, the variable-mass model of Anderson momentum and its
//! Hessian-damped refinement, integrated with fixed-step RK4.

mod schedule;

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::TraceRow;
use crate::problems::{Oracle, ProblemConfig};

pub use schedule::{Schedule, Schedules};

#[derive(Debug, Clone, PartialEq)]
pub struct OdeState {
    pub t: f64,
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    /// `M(t)/2 |v|^2 + f(x) - f*` (with `f* = 0` when unknown).
    pub energy: f64,
    /// Analytic `dE/dt` at this state.
    pub dissipation: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<OdeState>,
    /// Set when integration stopped early on a non-finite state.
    pub diverged: bool,
}

impl Trajectory {
    pub fn last(&self) -> &OdeState {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|s| s.t)
    }
}

/// `-(c - M'/2) |v|^2 - sqrt(h) b(t) <v, Hess f v>`.
pub fn dissipation_rate(
    oracle: &dyn Oracle,
    x: &DVector<f64>,
    v: &DVector<f64>,
    t: f64,
    schedules: &Schedules,
    mass_dot: f64,
) -> f64 {
    let vv = v.norm_squared();
    if vv == 0.0 {
        return 0.0;
    }
    let c = schedules.damping.value(t);
    let mut rate = -(c - 0.5 * mass_dot) * vv;
    if schedules.sqrt_h != 0.0 {
        let b = schedules.geom_beta.value(t);
        if b != 0.0 {
            rate -= schedules.sqrt_h * b * v.dot(&oracle.hvp(x, v));
        }
    }
    rate
}

fn energy(oracle: &dyn Oracle, x: &DVector<f64>, v: &DVector<f64>, mass: f64) -> f64 {
    let fstar = oracle.metadata().min_value.unwrap_or(0.0);
    0.5 * mass * v.norm_squared() + oracle.value(x) - fstar
}

struct Integrator<'a> {
    oracle: &'a dyn Oracle,
    schedules: &'a Schedules,
    dt: f64,
}

impl Integrator<'_> {
    fn acceleration(&self, t: f64, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        let m = self.schedules.mass_at(t)?;
        let c = self.schedules.damping.value(t);
        let mut force = -self.oracle.gradient(x);
        force.axpy(-c, v, 1.0);
        if self.schedules.sqrt_h != 0.0 {
            let b = self.schedules.geom_beta.value(t);
            if b != 0.0 {
                force.axpy(-self.schedules.sqrt_h * b, &self.oracle.hvp(x, v), 1.0);
            }
        }
        Ok(force / m)
    }

    fn state(&self, t: f64, x: DVector<f64>, v: DVector<f64>) -> Result<OdeState> {
        let m = self.schedules.mass_at(t)?;
        let mass_dot = self.schedules.mass.centered_derivative(t, self.dt);
        let dissipation = dissipation_rate(self.oracle, &x, &v, t, self.schedules, mass_dot);
        Ok(OdeState {
            t,
            energy: energy(self.oracle, &x, &v, m),
            dissipation,
            x,
            v,
        })
    }

    fn rk4(&self, t: f64, h: f64, x: &DVector<f64>, v: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let a1 = self.acceleration(t, x, v)?;
        let (x2, v2) = (x + v * (0.5 * h), v + &a1 * (0.5 * h));
        let a2 = self.acceleration(t + 0.5 * h, &x2, &v2)?;
        let (x3, v3) = (x + &v2 * (0.5 * h), v + &a2 * (0.5 * h));
        let a3 = self.acceleration(t + 0.5 * h, &x3, &v3)?;
        let (x4, v4) = (x + &v3 * h, v + &a3 * h);
        let a4 = self.acceleration(t + h, &x4, &v4)?;
        let x_new = x + (v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
        let v_new = v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
        Ok((x_new, v_new))
    }

    fn run(&self, x0: DVector<f64>, v0: DVector<f64>, t0: f64, t_end: f64) -> Result<Trajectory> {
        let steps = ((t_end - t0) / self.dt - 1e-9).ceil().max(1.0) as usize;
        let mut states = Vec::with_capacity(steps + 1);
        states.push(self.state(t0, x0, v0)?);
        let mut diverged = false;
        for i in 0..steps {
            let cur = &states[i];
            let t_next = if i + 1 == steps {
                t_end
            } else {
                t0 + (i + 1) as f64 * self.dt
            };
            let (x, v) = self.rk4(cur.t, t_next - cur.t, &cur.x, &cur.v)?;
            if !x.iter().chain(v.iter()).all(|z| z.is_finite()) {
                diverged = true;
                break;
            }
            let next = self.state(t_next, x, v)?;
            if !next.energy.is_finite() {
                diverged = true;
                break;
            }
            states.push(next);
        }
        Ok(Trajectory { states, diverged })
    }
}

fn validate(oracle: &dyn Oracle, x0: &DVector<f64>, v0: &DVector<f64>, t0: f64, t_end: f64, dt: f64) -> Result<()> {
    for got in [x0.len(), v0.len()] {
        if got != oracle.dim() {
            return Err(Error::DimensionMismatch {
                expected: oracle.dim(),
                got,
            });
        }
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    if !(t_end > t0) || !t_end.is_finite() || !t0.is_finite() {
        return Err(Error::invalid("t_end", format!("need t0 < t_end, got [{t0}, {t_end}]")));
    }
    if !x0.iter().chain(v0.iter()).all(|z| z.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    Ok(())
}

/// `x'' + (3/t) x' + grad f(x) = 0` from rest at `t0 > 0`.
pub fn integrate_avd(oracle: &dyn Oracle, x0: &DVector<f64>, t0: f64, t_end: f64, dt: f64) -> Result<Trajectory> {
    if !(t0 > 0.0) {
        return Err(Error::invalid("t0", format!("the 3/t damping needs t0 > 0, got {t0}")));
    }
    let v0 = DVector::zeros(x0.len());
    validate(oracle, x0, &v0, t0, t_end, dt)?;
    let schedules = Schedules::avd();
    Integrator {
        oracle,
        schedules: &schedules,
        dt,
    }
    .run(x0.clone(), v0, t0, t_end)
}

/// `M(t) x'' + c(t) x' + grad f(x) = 0`.
pub fn integrate_variable_mass(
    oracle: &dyn Oracle,
    schedules: &Schedules,
    x0: &DVector<f64>,
    v0: &DVector<f64>,
    t0: f64,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let plain = Schedules {
        sqrt_h: 0.0,
        ..schedules.clone()
    };
    integrate_ishd(oracle, &plain, x0, v0, t0, t_end, dt)
}

/// `M(t) x'' + c(t) x' + grad f(x) + sqrt(h) b(t) Hess f(x) x' = 0`.
pub fn integrate_ishd(
    oracle: &dyn Oracle,
    schedules: &Schedules,
    x0: &DVector<f64>,
    v0: &DVector<f64>,
    t0: f64,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    validate(oracle, x0, v0, t0, t_end, dt)?;
    Integrator { oracle, schedules, dt }.run(x0.clone(), v0.clone(), t0, t_end)
}

/// Piecewise-linear schedules through `(k sqrt(h), M_k)`, `(k sqrt(h), c_k)` and
/// `(k sqrt(h), sum_j j gamma_j)` over the rows that carry diagnostics.
pub fn schedules_from_trace(rows: &[TraceRow], h: f64, mass_floor: f64) -> Result<Schedules> {
    if !(h > 0.0) {
        return Err(Error::invalid("h", format!("must be positive, got {h}")));
    }
    let sqrt_h = h.sqrt();
    let (mut times, mut mass, mut damping, mut beta) = (vec![], vec![], vec![], vec![]);
    for row in rows {
        if let (Some(m), Some(c), Some(s)) = (row.m_eff, row.c_k, row.consistency_sum) {
            times.push(row.k as f64 * sqrt_h);
            mass.push(m.max(mass_floor));
            damping.push(c);
            beta.push(s);
        }
    }
    if times.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(Schedules {
        mass: Schedule::piecewise_linear(times.clone(), mass)?,
        damping: Schedule::piecewise_linear(times.clone(), damping)?,
        geom_beta: Schedule::piecewise_linear(times, beta)?,
        sqrt_h,
        mass_floor,
    })
}

/// `x(t)` by linear interpolation between integrator nodes.
pub fn interpolate(states: &[OdeState], t: f64) -> Result<DVector<f64>> {
    let (first, last) = match (states.first(), states.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Err(Error::EmptyTrace),
    };
    let slack = 1e-9 * (1.0 + last.abs());
    if t < first - slack || t > last + slack {
        return Err(Error::CoverageGap {
            start: first,
            end: last,
            requested: t,
        });
    }
    let i = states.partition_point(|s| s.t <= t).clamp(1, states.len().max(2) - 1);
    if states.len() == 1 {
        return Ok(states[0].x.clone());
    }
    let (a, b) = (&states[i - 1], &states[i]);
    let w = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
    Ok(&a.x + (&b.x - &a.x) * w)
}

/// `sup_k |x_k - x(k sqrt(h))|` over `k >= 1`; `iterates[0]` is `x_0`.
pub fn discrete_vs_ode_deviation(iterates: &[DVector<f64>], states: &[OdeState], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::invalid("h", format!("must be positive, got {h}")));
    }
    let sqrt_h = h.sqrt();
    let mut worst: f64 = 0.0;
    for (k, x) in iterates.iter().enumerate().skip(1) {
        let xt = interpolate(states, k as f64 * sqrt_h)?;
        worst = worst.max((x - xt).norm());
    }
    Ok(worst)
}

pub fn write_trajectory_csv(path: &Path, states: &[OdeState]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let n = states.first().map_or(0, |s| s.x.len());
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend(["v_norm", "energy_E", "dissipation_rate"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for s in states {
        let mut rec = vec![format!("{:?}", s.t)];
        rec.extend(s.x.iter().map(|v| format!("{v:?}")));
        rec.push(format!("{:?}", s.v.norm()));
        rec.push(format!("{:?}", s.energy));
        rec.push(format!("{:?}", s.dissipation));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeKind {
    Avd,
    Vm,
    Ishd,
}

fn default_ode_problem() -> ProblemConfig {
    ProblemConfig::Quadratic {
        n: 1,
        kappa: 1.0,
        spacing: Default::default(),
    }
}
fn default_t0() -> f64 {
    0.1
}
fn default_t_end() -> f64 {
    20.0
}
fn default_dt() -> f64 {
    1e-3
}

/// JSON description of one integration; every field has a default
/// (`f = x^2 / 2` from `x0 = 1` over `[0.1, 20]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    #[serde(default = "default_ode_problem")]
    pub problem: ProblemConfig,
    /// Defaults to all ones.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Defaults to zero. Ignored by the AVD model, which starts at rest.
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
    #[serde(default = "default_t0")]
    pub t0: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Used by the variable-mass and Hessian-damped models; defaults to the AVD coefficients.
    #[serde(default)]
    pub schedules: Option<Schedules>,
}

impl Default for OdeConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl OdeConfig {
    pub fn integrate(&self, kind: OdeKind) -> Result<Trajectory> {
        let oracle = self.problem.build()?;
        let n = oracle.dim();
        let x0 = self
            .x0
            .as_ref()
            .map_or_else(|| DVector::from_element(n, 1.0), |v| DVector::from_column_slice(v));
        let v0 = self
            .v0
            .as_ref()
            .map_or_else(|| DVector::zeros(n), |v| DVector::from_column_slice(v));
        let schedules = self.schedules.clone().unwrap_or_else(Schedules::avd);
        match kind {
            OdeKind::Avd => integrate_avd(oracle.as_ref(), &x0, self.t0, self.t_end, self.dt),
            OdeKind::Vm => integrate_variable_mass(oracle.as_ref(), &schedules, &x0, &v0, self.t0, self.t_end, self.dt),
            OdeKind::Ishd => integrate_ishd(oracle.as_ref(), &schedules, &x0, &v0, self.t0, self.t_end, self.dt),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Quadratic;

    fn half_square() -> Quadratic {
        Quadratic::diagonal(DVector::from_element(1, 1.0)).unwrap()
    }

    #[test]
    fn equilibrium_is_stationary() {
        let q = half_square();
        let traj = integrate_avd(&q, &DVector::zeros(1), 0.1, 2.0, 0.01).unwrap();
        assert!(traj.states.iter().all(|s| s.x[0] == 0.0 && s.v[0] == 0.0));
        assert!((traj.last().t - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rest_state_has_zero_rate() {
        let q = half_square();
        let v = DVector::zeros(1);
        assert_eq!(
            dissipation_rate(&q, &DVector::from_element(1, 3.0), &v, 1.0, &Schedules::avd(), 0.0),
            0.0
        );
    }

    #[test]
    fn balanced_damping_has_zero_rate() {
        let q = half_square();
        let mut s = Schedules::avd();
        s.damping = Schedule::constant(0.4);
        let rate = dissipation_rate(
            &q,
            &DVector::from_element(1, 1.0),
            &DVector::from_element(1, 2.5),
            1.0,
            &s,
            0.8,
        );
        assert_eq!(rate, 0.0);
    }

    #[test]
    fn frictionless_oscillator_conserves_energy() {
        let q = half_square();
        let s = Schedules {
            mass: Schedule::constant(2.0),
            damping: Schedule::constant(0.0),
            geom_beta: Schedule::constant(0.0),
            sqrt_h: 0.0,
            mass_floor: 1e-3,
        };
        let traj = integrate_variable_mass(
            &q,
            &s,
            &DVector::from_element(1, 1.0),
            &DVector::zeros(1),
            0.0,
            10.0,
            1e-3,
        )
        .unwrap();
        let e0 = traj.states[0].energy;
        assert!(traj.states.iter().all(|st| (st.energy - e0).abs() < 1e-6));
    }

    #[test]
    fn zero_sqrt_h_reduces_to_variable_mass() {
        let q = Quadratic::uniform_spectrum(3, 10.0).unwrap();
        let s = Schedules {
            mass: Schedule::Affine {
                offset: 1.0,
                slope: 0.1,
            },
            damping: Schedule::constant(0.5),
            geom_beta: Schedule::constant(1.0),
            sqrt_h: 0.0,
            mass_floor: 1e-3,
        };
        let x0 = DVector::from_vec(vec![1.0, -1.0, 0.5]);
        let v0 = DVector::zeros(3);
        let a = integrate_ishd(&q, &s, &x0, &v0, 0.0, 2.0, 1e-2).unwrap();
        let b = integrate_variable_mass(&q, &s, &x0, &v0, 0.0, 2.0, 1e-2).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn interpolation_and_coverage() {
        let q = half_square();
        let traj = integrate_avd(&q, &DVector::from_element(1, 1.0), 0.5, 1.0, 0.25).unwrap();
        let mid = interpolate(&traj.states, 0.625).unwrap();
        assert!((mid[0] - 0.5 * (traj.states[0].x[0] + traj.states[1].x[0])).abs() < 1e-15);
        assert!(matches!(interpolate(&traj.states, 1.5), Err(Error::CoverageGap { .. })));
    }

    #[test]
    fn schedules_from_constant_and_gd_traces() {
        let row = |k, m, c, s| TraceRow {
            k,
            f: 0.0,
            grad_norm: 0.0,
            m_eff: Some(m),
            delta_m: Some(0.0),
            rho: Some(1.0),
            c_k: Some(c),
            gain_delta: Some(1.0),
            consistency_sum: Some(s),
            wall_nanos: None,
        };
        let h: f64 = 0.01;
        let rows: Vec<_> = (1..6).map(|k| row(k, 0.5, 1.0 / h.sqrt(), 0.0)).collect();
        let s = schedules_from_trace(&rows, h, 1e-3).unwrap();
        for t in [0.05, 0.2, 0.33] {
            assert_eq!(s.mass.value(t), 0.5);
            assert!((s.damping.value(t) - 10.0).abs() < 1e-12);
            assert_eq!(s.geom_beta.value(t), 0.0);
        }
        let rows: Vec<_> = (1..4).map(|k| row(k, k as f64, 0.0, 1.0)).collect();
        let s = schedules_from_trace(&rows, h, 1e-3).unwrap();
        assert!((s.mass.derivative(0.1) - 1.0 / h.sqrt()).abs() < 1e-9);
        assert!(matches!(schedules_from_trace(&[], h, 1e-3), Err(Error::EmptyTrace)));
    }

    #[test]
    fn default_config_runs() {
        let cfg = OdeConfig {
            t_end: 1.0,
            ..Default::default()
        };
        let traj = cfg.integrate(OdeKind::Avd).unwrap();
        assert!(traj.states.windows(2).all(|w| w[1].t > w[0].t));
    }
}
