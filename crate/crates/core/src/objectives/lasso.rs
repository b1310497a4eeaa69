use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};
use statrs::function::erf::erf;

use super::{check_batch, check_reg, Capabilities, ExactExpectation, Minibatch, Objective};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, MIN_VARIANCE};

/// `f(θ) = c·Σᵢ(yᵢ − θᵀxᵢ)² + λ‖θ‖₁`, with `c = 1` for the full data set.
#[derive(Clone, Debug)]
pub struct Lasso {
    x: DMatrix<f64>,
    y: DVector<f64>,
    reg: f64,
    scale: f64,
    gram: DMatrix<f64>,
}

pub fn make_lasso(data: &Dataset, reg_strength: f64) -> Result<Lasso> {
    check_reg(reg_strength)?;
    Ok(Lasso::new(data.features().clone(), data.labels().clone(), reg_strength, 1.0))
}

/// `E|X|` for `X ~ N(mean, sd²)` and its derivatives in `mean` and in `sd²`.
pub fn expected_abs(mean: f64, sd: f64) -> (f64, f64, f64) {
    let z = mean / sd;
    let pdf = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    let centered = erf(z * FRAC_1_SQRT_2); // 2Φ(z) − 1
    (2.0 * sd * pdf + mean * centered, centered, pdf / sd)
}

impl Lasso {
    fn new(x: DMatrix<f64>, y: DVector<f64>, reg: f64, scale: f64) -> Self {
        let gram = x.transpose() * &x;
        Self {
            x,
            y,
            reg,
            scale,
            gram,
        }
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn reg_strength(&self) -> f64 {
        self.reg
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `XᵀX`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    fn residual(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.y - &self.x * theta
    }

    fn check_smooth(&self, theta: &DVector<f64>) -> Result<()> {
        if self.reg > 0.0 {
            if let Some(d) = theta.iter().position(|v| *v == 0.0) {
                return Err(Error::NonSmoothPoint(d));
            }
        }
        Ok(())
    }

    fn marginal_sds(q: &GaussianState) -> DVector<f64> {
        q.variances().map(|v| v.max(MIN_VARIANCE).sqrt())
    }
}

impl Objective for Lasso {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities::VALUE
            | Capabilities::GRAD
            | Capabilities::HESS
            | Capabilities::HESS_DIAG
            | Capabilities::EXACT_EXPECTATION
            | Capabilities::MINIBATCH
            | Capabilities::NON_SMOOTH
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        self.scale * self.residual(theta).norm_squared() + self.reg * theta.lp_norm(1)
    }

    fn gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_smooth(theta)?;
        let data = self.x.tr_mul(&self.residual(theta)) * (-2.0 * self.scale);
        Ok(data + theta.map(|t| self.reg * t.signum()))
    }

    fn hessian(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_smooth(theta)?;
        Ok(&self.gram * (2.0 * self.scale))
    }

    fn exact(&self) -> Option<&dyn ExactExpectation> {
        Some(self)
    }

    fn minibatch(&self) -> Option<&dyn Minibatch> {
        Some(self)
    }

    fn as_lasso(&self) -> Option<&Lasso> {
        Some(self)
    }
}

impl ExactExpectation for Lasso {
    fn expected_value(&self, q: &GaussianState) -> Result<f64> {
        let mu = q.mean();
        let spread = self.gram.component_mul(&q.covariance()).sum();
        let l1: f64 = mu
            .iter()
            .zip(Self::marginal_sds(q).iter())
            .map(|(&m, &s)| expected_abs(m, s).0)
            .sum();
        Ok(self.scale * (self.residual(mu).norm_squared() + spread) + self.reg * l1)
    }

    fn grad_mean(&self, q: &GaussianState) -> Result<DVector<f64>> {
        let mu = q.mean();
        let sds = Self::marginal_sds(q);
        let data = self.x.tr_mul(&self.residual(mu)) * (-2.0 * self.scale);
        Ok(data + DVector::from_fn(mu.len(), |d, _| self.reg * expected_abs(mu[d], sds[d]).1))
    }

    fn grad_cov(&self, q: &GaussianState) -> Result<DMatrix<f64>> {
        let mu = q.mean();
        let sds = Self::marginal_sds(q);
        let mut g = &self.gram * self.scale;
        for d in 0..mu.len() {
            g[(d, d)] += self.reg * expected_abs(mu[d], sds[d]).2;
        }
        Ok(g)
    }
}

impl Minibatch for Lasso {
    fn num_examples(&self) -> usize {
        self.x.nrows()
    }

    fn batch(&self, indices: &[usize]) -> Result<Box<dyn Objective>> {
        check_batch(indices, self.num_examples())?;
        let x = self.x.select_rows(indices);
        let y = DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.y[i]));
        let scale = self.scale * self.num_examples() as f64 / indices.len() as f64;
        Ok(Box::new(Lasso::new(x, y, self.reg, scale)))
    }
}
