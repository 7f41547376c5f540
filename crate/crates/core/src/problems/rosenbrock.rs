use nalgebra::DVector;

use super::{Oracle, ProblemMetadata};
use crate::error::{Error, Result};

/// `f(x) = (1 - x1)^2 + a (x2 - x1^2)^2`, minimized at `(1, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct Rosenbrock {
    a: f64,
}

impl Rosenbrock {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::invalid("a", format!("must be positive, got {a}")));
        }
        Ok(Rosenbrock { a })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
}

impl Oracle for Rosenbrock {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let (x1, x2) = (x[0], x[1]);
        (1.0 - x1).powi(2) + self.a * (x2 - x1 * x1).powi(2)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let (x1, x2) = (x[0], x[1]);
        let valley = x2 - x1 * x1;
        DVector::from_vec(vec![
            -2.0 * (1.0 - x1) - 4.0 * self.a * x1 * valley,
            2.0 * self.a * valley,
        ])
    }

    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let (x1, x2) = (x[0], x[1]);
        let h11 = 2.0 - 4.0 * self.a * (x2 - x1 * x1) + 8.0 * self.a * x1 * x1;
        let h12 = -4.0 * self.a * x1;
        let h22 = 2.0 * self.a;
        DVector::from_vec(vec![h11 * v[0] + h12 * v[1], h12 * v[0] + h22 * v[1]])
    }

    fn metadata(&self) -> ProblemMetadata {
        ProblemMetadata {
            min_value: Some(0.0),
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizer() {
        let r = Rosenbrock::new(100.0).unwrap();
        let x = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(r.value(&x), 0.0);
        assert_eq!(r.gradient(&x), DVector::zeros(2));
    }

    #[test]
    fn origin_with_unit_scale() {
        let r = Rosenbrock::new(1.0).unwrap();
        assert_eq!(r.value(&DVector::zeros(2)), 1.0);
    }

    #[test]
    fn standard_start_point() {
        // (1 + 1.5)^2 + 20 (1.5 - 2.25)^2 = 6.25 + 11.25
        let r = Rosenbrock::new(20.0).unwrap();
        let v = r.value(&DVector::from_vec(vec![-1.5, 1.5]));
        assert!((v - 17.5).abs() < 1e-14);
    }

    #[test]
    fn analytic_hvp_matches_finite_difference() {
        let r = Rosenbrock::new(20.0).unwrap();
        let x = DVector::from_vec(vec![-0.7, 1.3]);
        let v = DVector::from_vec(vec![0.4, -1.1]);
        let exact = r.hvp(&x, &v);
        let fd = crate::problems::finite_difference_hvp(&r, &x, &v);
        assert!((exact - &fd).norm() <= 1e-6 * fd.norm());
    }

    #[test]
    fn rejects_nonpositive_scale() {
        assert!(Rosenbrock::new(0.0).is_err());
    }
}
