use nalgebra::{DMatrix, DVector};

use super::{Capabilities, ExactExpectation, Objective};
use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::linalg::{self, Ldl};

/// `f(θ) = ½(θ − a)ᵀA(θ − a)` with `A` symmetric positive-definite.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    a: DMatrix<f64>,
    center: DVector<f64>,
}

pub fn make_quadratic(a: DMatrix<f64>, center: DVector<f64>) -> Result<Quadratic> {
    if a.nrows() != center.len() || a.ncols() != center.len() {
        return Err(Error::DimensionMismatch {
            expected: center.len(),
            found: a.nrows(),
        });
    }
    if !linalg::is_symmetric(&a, 1e-12) || Ldl::new(&a).is_err() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(Quadratic { a, center })
}

impl Quadratic {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities::VALUE
            | Capabilities::GRAD
            | Capabilities::HESS
            | Capabilities::HESS_DIAG
            | Capabilities::EXACT_EXPECTATION
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        let r = theta - &self.center;
        0.5 * r.dot(&(&self.a * &r))
    }

    fn gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.a * (theta - &self.center))
    }

    fn hessian(&self, _theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.a.clone())
    }

    fn exact(&self) -> Option<&dyn ExactExpectation> {
        Some(self)
    }
}

impl ExactExpectation for Quadratic {
    fn expected_value(&self, q: &GaussianState) -> Result<f64> {
        let tr = self.a.component_mul(&q.covariance()).sum();
        Ok(self.value(q.mean()) + 0.5 * tr)
    }

    fn grad_mean(&self, q: &GaussianState) -> Result<DVector<f64>> {
        self.gradient(q.mean())
    }

    fn grad_cov(&self, _q: &GaussianState) -> Result<DMatrix<f64>> {
        Ok(&self.a * 0.5)
    }
}
