use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use egaa_core::bench::X0Policy;
use egaa_core::ode::{
    discrete_vs_ode_deviation, dissipation_rate, integrate_avd, integrate_ishd, integrate_variable_mass, interpolate,
    schedules_from_trace, OdeConfig, OdeKind, OdeState, Schedule, Schedules,
};
use egaa_core::optimizers::{run_with_options, Method, OptimizerConfig, RunOptions};
use egaa_core::problems::Quadratic;

fn scalar_half_square() -> Quadratic {
    Quadratic::uniform_spectrum(1, 1.0).unwrap()
}

fn schedules(mass: Schedule, damping: Schedule, geom_beta: Schedule, sqrt_h: f64) -> Schedules {
    Schedules {
        mass,
        damping,
        geom_beta,
        sqrt_h,
        mass_floor: 1e-3,
    }
}

fn oscillator() -> Schedules {
    schedules(
        Schedule::constant(1.0),
        Schedule::constant(0.0),
        Schedule::constant(0.0),
        0.0,
    )
}

#[test]
fn variable_mass_with_avd_coefficients_is_avd() {
    let q = Quadratic::uniform_spectrum(3, 10.0).unwrap();
    let x0 = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let avd = integrate_avd(&q, &x0, 0.5, 8.0, 1e-3).unwrap();
    let vm = integrate_variable_mass(&q, &Schedules::avd(), &x0, &DVector::zeros(3), 0.5, 8.0, 1e-3).unwrap();
    assert_eq!(avd.states.len(), vm.states.len());
    for (a, b) in avd.states.iter().zip(&vm.states) {
        assert_eq!(a.t, b.t);
        assert!((&a.x - &b.x).amax() <= 1e-12);
    }
}

#[test]
fn rk4_global_error_is_fourth_order() {
    // x'' + x = 0 from (1, 0): x(t) = cos t.
    let q = scalar_half_square();
    let x0 = DVector::from_element(1, 1.0);
    let v0 = DVector::zeros(1);
    let err = |dt: f64| {
        let traj = integrate_variable_mass(&q, &oscillator(), &x0, &v0, 0.0, 10.0, dt).unwrap();
        (traj.last().x[0] - 10f64.cos()).abs()
    };
    let (e1, e2, e3) = (err(0.1), err(0.05), err(0.025));
    for ratio in [e1 / e2, e2 / e3] {
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn halving_step_shrinks_endpoint_change_sixteenfold() {
    let q = Quadratic::uniform_spectrum(2, 4.0).unwrap();
    let x0 = DVector::from_vec(vec![1.0, 1.0]);
    let end = |dt: f64| integrate_avd(&q, &x0, 1.0, 6.0, dt).unwrap().last().x.clone();
    let (a, b, c) = (end(0.04), end(0.02), end(0.01));
    let ratio = (&a - &b).norm() / (&b - &c).norm();
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn growing_mass_without_damping_gains_energy() {
    let q = scalar_half_square();
    let s = schedules(
        Schedule::Affine {
            offset: 1.0,
            slope: 0.5,
        },
        Schedule::constant(0.1),
        Schedule::constant(0.0),
        0.0,
    );
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
    assert!(traj.states.windows(2).any(|w| w[1].energy > w[0].energy + 1e-8));
}

#[test]
fn hessian_damping_alone_never_gains_energy() {
    let q = Quadratic::uniform_spectrum(4, 20.0).unwrap();
    let s = schedules(
        Schedule::constant(1.0),
        Schedule::constant(0.0),
        Schedule::constant(1.0),
        0.1,
    );
    let x0 = DVector::from_vec(vec![1.0, -1.0, 2.0, 0.3]);
    let traj = integrate_ishd(&q, &s, &x0, &DVector::zeros(4), 0.0, 10.0, 1e-3).unwrap();
    assert!(traj.states.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-12));
    assert!(traj.last().energy < 0.5 * traj.states[0].energy);
}

/// Largest |x_stiff| over the second half of the run.
fn stiff_amplitude(sqrt_h: f64) -> f64 {
    let q = Quadratic::diagonal(DVector::from_vec(vec![1.0, 100.0])).unwrap();
    let s = schedules(
        Schedule::constant(1.0),
        Schedule::InverseTime { scale: 3.0 },
        Schedule::constant(1.0),
        sqrt_h,
    );
    let traj = integrate_ishd(
        &q,
        &s,
        &DVector::from_vec(vec![1.0, 1.0]),
        &DVector::zeros(2),
        0.1,
        10.0,
        1e-3,
    )
    .unwrap();
    traj.states
        .iter()
        .filter(|st| st.t >= 5.0)
        .map(|st| st.x[1].abs())
        .fold(0.0, f64::max)
}

#[test]
fn hessian_damping_suppresses_stiff_oscillation() {
    let amps: Vec<f64> = [0.0, 0.03, 0.1].into_iter().map(stiff_amplitude).collect();
    assert!(amps[1] < amps[0] && amps[2] < amps[1], "{amps:?}");
}

#[test]
fn analytic_rate_matches_finite_difference_at_random_states() {
    let q = Quadratic::uniform_spectrum(5, 30.0).unwrap();
    let s = schedules(
        Schedule::Affine {
            offset: 2.0,
            slope: 0.4,
        },
        Schedule::InverseTime { scale: 2.0 },
        Schedule::Affine {
            offset: 1.0,
            slope: -0.05,
        },
        0.2,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let dt = 1e-4;
    for _ in 0..10 {
        let x = DVector::from_fn(5, |_, _| StandardNormal.sample(&mut rng));
        let v = DVector::from_fn(5, |_, _| StandardNormal.sample(&mut rng));
        let traj = integrate_ishd(&q, &s, &x, &v, 1.0, 1.0 + 2.0 * dt, dt).unwrap();
        let fd = (traj.states[2].energy - traj.states[0].energy) / (2.0 * dt);
        let analytic = dissipation_rate(&q, &traj.states[1].x, &traj.states[1].v, traj.states[1].t, &s, 0.4);
        assert!(
            (fd - analytic).abs() <= 1e-5 * analytic.abs().max(1.0),
            "fd {fd} analytic {analytic}"
        );
    }
}

#[test]
fn energy_bookkeeping_error_shrinks_with_step() {
    // Integrated dE/dt (trapezoid) against the actual energy change.
    let q = Quadratic::uniform_spectrum(3, 10.0).unwrap();
    let s = schedules(
        Schedule::Affine {
            offset: 1.0,
            slope: 0.2,
        },
        Schedule::constant(0.5),
        Schedule::constant(1.0),
        0.1,
    );
    let x0 = DVector::from_vec(vec![1.0, -1.0, 0.5]);
    let v0 = DVector::from_vec(vec![0.3, 0.2, -0.4]);
    let mismatch = |dt: f64| {
        let traj = integrate_ishd(&q, &s, &x0, &v0, 0.0, 5.0, dt).unwrap();
        let integral: f64 = traj
            .states
            .windows(2)
            .map(|w| 0.5 * (w[0].dissipation + w[1].dissipation) * (w[1].t - w[0].t))
            .sum();
        (traj.last().energy - traj.states[0].energy - integral).abs()
    };
    let (coarse, fine) = (mismatch(2e-3), mismatch(1e-3));
    assert!(fine < 0.3 * coarse, "coarse {coarse} fine {fine}");
}

#[test]
fn sampling_the_ode_itself_gives_interpolation_level_deviation() {
    let q = scalar_half_square();
    let x0 = DVector::from_element(1, 1.0);
    let h: f64 = 1e-2;
    let fine = integrate_avd(&q, &x0, 0.1, 5.0, 1e-3).unwrap();
    let coarse = integrate_avd(&q, &x0, 0.1, 5.0, 1e-2).unwrap();
    let samples: Vec<DVector<f64>> = (0..=49)
        .map(|k| interpolate(&fine.states, (0.1 + k as f64 * h.sqrt()).min(5.0)).unwrap())
        .collect();
    // Shift times so that sample k sits at k sqrt(h) on the shifted trajectory.
    let shifted: Vec<OdeState> = fine
        .states
        .iter()
        .map(|st| OdeState {
            t: st.t - 0.1,
            ..st.clone()
        })
        .collect();
    let dev = discrete_vs_ode_deviation(&samples, &shifted, h).unwrap();
    assert!(dev <= 1e-12, "{dev}");
    // A coarser integration of the same flow stays within its interpolation error.
    let shifted_coarse: Vec<OdeState> = coarse
        .states
        .iter()
        .map(|st| OdeState {
            t: st.t - 0.1,
            ..st.clone()
        })
        .collect();
    let dev = discrete_vs_ode_deviation(&samples, &shifted_coarse, h).unwrap();
    assert!(dev <= 1e-4, "{dev}");
}

#[test]
fn nag_tracks_avd_better_as_step_shrinks() {
    let q = scalar_half_square();
    let x0 = DVector::from_element(1, 1.0);
    let mut previous = f64::INFINITY;
    for h in [1e-2f64, 1e-3, 1e-4] {
        let sqrt_h = h.sqrt();
        let steps = (5.0 / sqrt_h).round() as usize;
        let mut cfg = OptimizerConfig::new(Method::Nag, h).with_max_iters(steps);
        cfg.grad_tol = None;
        let opts = RunOptions {
            record_timing: false,
            keep_iterates: true,
        };
        let xs = run_with_options(&q, &cfg, &x0, opts).unwrap().iterates;
        let traj = integrate_avd(&q, &x0, sqrt_h, steps as f64 * sqrt_h, (sqrt_h / 10.0).min(1e-3)).unwrap();
        let dev = discrete_vs_ode_deviation(&xs, &traj.states, h).unwrap();
        assert!(dev < previous, "h {h}: {dev} vs {previous}");
        previous = dev;
    }
}

fn egaa_vs_own_schedule(h: f64) -> f64 {
    let q = Quadratic::uniform_spectrum(100, 50.0).unwrap();
    let x0 = X0Policy::StandardNormal { seed: 1 }.materialize(100).unwrap();
    let sqrt_h = h.sqrt();
    let steps = (5.0 / sqrt_h).round() as usize;
    let mut cfg = OptimizerConfig::new(Method::Egaa, h)
        .with_guard(5.0, 0.1)
        .with_max_iters(steps);
    cfg.grad_tol = None;
    let opts = RunOptions {
        record_timing: false,
        keep_iterates: true,
    };
    let trace = run_with_options(&q, &cfg, &x0, opts).unwrap();
    let s = schedules_from_trace(&trace.rows(false), h, 1e-3).unwrap();
    let v0 = DVector::zeros(100);
    let t_end = trace.iterates.len().saturating_sub(1) as f64 * sqrt_h;
    let traj = integrate_variable_mass(
        &q,
        &s,
        &trace.iterates[0],
        &v0,
        sqrt_h,
        t_end,
        (sqrt_h / 10.0).min(1e-3),
    )
    .unwrap();
    if traj.diverged {
        return f64::INFINITY;
    }
    discrete_vs_ode_deviation(&trace.iterates, &traj.states, h).unwrap()
}

#[test]
#[ignore = "the schedules built from guarded traces hit the mass floor with large negative damping and the model blows up"]
fn guarded_trace_tracks_its_variable_mass_model_better_as_step_shrinks() {
    let devs: Vec<f64> = [1e-2 / 50.0, 1e-3 / 50.0, 1e-4 / 50.0]
        .into_iter()
        .map(egaa_vs_own_schedule)
        .collect();
    assert!(
        devs[0].is_finite() && devs[1] < devs[0] && devs[2] < devs[1],
        "{devs:?}"
    );
}

#[test]
fn default_config_integrates_every_kind() {
    let cfg: OdeConfig = serde_json::from_str("{}").unwrap();
    assert_eq!(cfg, OdeConfig::default());
    for kind in [OdeKind::Avd, OdeKind::Vm, OdeKind::Ishd] {
        let traj = cfg.integrate(kind).unwrap();
        assert!(!traj.diverged);
        assert!(traj.states.windows(2).all(|w| w[1].t > w[0].t));
        let q = cfg.problem.build().unwrap();
        assert!(q.value(&traj.last().x) < q.value(&traj.states[0].x));
    }
}

#[test]
fn invalid_integration_requests_are_rejected() {
    let q = scalar_half_square();
    let x0 = DVector::from_element(1, 1.0);
    assert!(integrate_avd(&q, &x0, 0.0, 1.0, 1e-3).is_err());
    assert!(integrate_avd(&q, &x0, 1.0, 2.0, 0.0).is_err());
    assert!(integrate_avd(&q, &DVector::zeros(2), 1.0, 2.0, 1e-3).is_err());
    let light = schedules(
        Schedule::constant(1e-6),
        Schedule::constant(0.0),
        Schedule::constant(0.0),
        0.0,
    );
    assert!(integrate_variable_mass(&q, &light, &x0, &DVector::zeros(1), 0.0, 1.0, 1e-2).is_err());
}
