use nalgebra::{DMatrix, DVector};

use super::{Capabilities, ExactExpectation, GlmStructure, Lasso, Minibatch, Objective};
use crate::error::{Error, Result};

/// Variational-inference loss `E_q[−log p(y, θ)] − H(q)`.
///
/// Pointwise evaluations are those of the negative log joint; estimators add
/// the entropy contribution, which is `−½Σ⁻¹` in the covariance gradient and
/// zero in the mean gradient.
pub struct VariationalObjective {
    neg_log_joint: Box<dyn Objective>,
}

pub fn make_vi_objective(neg_log_joint: Box<dyn Objective>) -> Result<VariationalObjective> {
    if !neg_log_joint.has(Capabilities::GRAD) {
        return Err(Error::CapabilityMissing("gradient"));
    }
    Ok(VariationalObjective { neg_log_joint })
}

impl VariationalObjective {
    pub fn neg_log_joint(&self) -> &dyn Objective {
        self.neg_log_joint.as_ref()
    }
}

impl Objective for VariationalObjective {
    fn dim(&self) -> usize {
        self.neg_log_joint.dim()
    }

    fn capabilities(&self) -> Capabilities {
        self.neg_log_joint.capabilities()
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        self.neg_log_joint.value(theta)
    }

    fn gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        self.neg_log_joint.gradient(theta)
    }

    fn hessian(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.neg_log_joint.hessian(theta)
    }

    fn hessian_diag(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        self.neg_log_joint.hessian_diag(theta)
    }

    fn exact(&self) -> Option<&dyn ExactExpectation> {
        self.neg_log_joint.exact()
    }

    fn glm(&self) -> Option<&dyn GlmStructure> {
        self.neg_log_joint.glm()
    }

    fn minibatch(&self) -> Option<&dyn Minibatch> {
        self.neg_log_joint.minibatch().map(|_| self as &dyn Minibatch)
    }

    fn entropy_weight(&self) -> f64 {
        1.0 + self.neg_log_joint.entropy_weight()
    }

    fn as_lasso(&self) -> Option<&Lasso> {
        None
    }
}

impl Minibatch for VariationalObjective {
    fn num_examples(&self) -> usize {
        self.neg_log_joint
            .minibatch()
            .map_or(0, |m| m.num_examples())
    }

    fn batch(&self, indices: &[usize]) -> Result<Box<dyn Objective>> {
        let inner = self
            .neg_log_joint
            .minibatch()
            .ok_or(Error::CapabilityMissing("minibatch"))?
            .batch(indices)?;
        Ok(Box::new(VariationalObjective {
            neg_log_joint: inner,
        }))
    }
}
