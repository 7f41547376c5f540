//! The energy guard ("inertial governor") that scales momentum coefficients.
//!
//! Scaling every `gamma_j` by `rho` moves the mass along the line
//! `M(rho) = 1/2 + rho (M_curr - 1/2)`.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardBranch {
    Inactive,
    /// Mass growth above the limit was clamped.
    Growth,
    /// A negative candidate mass was pulled back to the boundary.
    NegativeMass,
}

/// Scaling factor from the guard's two branches, checked in order:
/// growth `dM > delta_max` gives `rho = delta_max / dM`, otherwise a negative
/// candidate mass gives `rho = -1 / (2 M_curr - 1)`.
pub fn energy_guard(m_curr: f64, m_prev: f64, delta_max: f64) -> (f64, GuardBranch) {
    let delta = m_curr - m_prev;
    if delta > delta_max {
        (delta_max / delta, GuardBranch::Growth)
    } else if m_curr < 0.0 {
        (-1.0 / (2.0 * m_curr - 1.0), GuardBranch::NegativeMass)
    } else {
        (1.0, GuardBranch::Inactive)
    }
}

fn scaled_mass(m_curr: f64, rho: f64) -> f64 {
    0.5 + rho * (m_curr - 0.5)
}

/// Adjust the guard's `rho` so the scaled mass honours both hard bounds:
/// `M - M_prev <= delta_max` and `M >= mass_floor`.
///
/// The growth formula alone only meets the first bound when `M_prev >= 1/2`.
/// Below that it is tightened to the exact `rho` landing on `M_prev + delta_max`.
/// When no `rho` in `[0, 1]` reaches the bound (the target lies below every
/// mass reachable by scaling) the smallest reachable mass is taken.
pub fn enforce_mass_bounds(rho: f64, m_curr: f64, m_prev: f64, delta_max: f64, mass_floor: f64) -> f64 {
    let mut rho = rho;
    let target = m_prev + delta_max;
    if scaled_mass(m_curr, rho) > target {
        rho = if m_curr > 0.5 {
            ((target - 0.5) / (m_curr - 0.5)).clamp(0.0, rho)
        } else {
            // M(rho) decreases in rho here; rho = 1 gives the lightest reachable mass.
            1.0
        };
    }
    if scaled_mass(m_curr, rho) < mass_floor {
        // Only reachable with m_curr < mass_floor < 1/2.
        rho = (0.5 - mass_floor) / (0.5 - m_curr);
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_clamp() {
        let (rho, branch) = energy_guard(7.0, 1.0, 5.0);
        assert_eq!(branch, GuardBranch::Growth);
        assert!((rho - 5.0 / 6.0).abs() < 1e-15);
        // M_prev >= 1/2, so the literal factor already satisfies the bound.
        assert_eq!(enforce_mass_bounds(rho, 7.0, 1.0, 5.0, 1e-3), rho);
        assert!(scaled_mass(7.0, rho) - 1.0 <= 5.0 + 1e-12);
    }

    #[test]
    fn inactive_below_limit() {
        assert_eq!(energy_guard(1.5, 1.0, 5.0), (1.0, GuardBranch::Inactive));
    }

    #[test]
    fn negative_mass_lands_on_zero_then_floor() {
        let (rho, branch) = energy_guard(-0.5, 1.0, 5.0);
        assert_eq!(branch, GuardBranch::NegativeMass);
        assert!((rho - 0.5).abs() < 1e-15);
        assert!(scaled_mass(-0.5, rho).abs() < 1e-15);
        let applied = enforce_mass_bounds(rho, -0.5, 1.0, 5.0, 1e-3);
        assert!((scaled_mass(-0.5, applied) - 1e-3).abs() < 1e-15);
        assert!(applied > 0.0 && applied < rho);
    }

    #[test]
    fn light_previous_mass_is_tightened() {
        // M_prev below 1/2: the plain factor would overshoot the bound.
        let (m_prev, m_curr, dmax) = (0.001, 100.0, 5.0);
        let (rho, _) = energy_guard(m_curr, m_prev, dmax);
        assert!(scaled_mass(m_curr, rho) - m_prev > dmax);
        let applied = enforce_mass_bounds(rho, m_curr, m_prev, dmax, 1e-3);
        assert!((scaled_mass(m_curr, applied) - m_prev - dmax).abs() < 1e-12);
    }

    #[test]
    fn growth_rho_is_nonincreasing_in_delta() {
        let mut last = f64::INFINITY;
        for i in 1..200 {
            let m_curr = 1.0 + 2.0 + 0.37 * i as f64;
            let (rho, branch) = energy_guard(m_curr, 1.0, 2.0);
            assert_eq!(branch, GuardBranch::Growth);
            assert!(rho <= last);
            last = rho;
        }
    }
}
