//! Target functions `f(θ)` and, where they exist, closed-form expectation engines.

mod lasso;
mod logistic;
mod quadratic;
mod sinc;
mod vi;

use bitflags::bitflags;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;

pub use lasso::{expected_abs, make_lasso, Lasso};
pub use logistic::{make_logistic, test_log_loss, Logistic};
pub use quadratic::{make_quadratic, Quadratic};
pub use sinc::{make_sinc, Sinc};
pub use vi::{make_vi_objective, VariationalObjective};

bitflags! {
    #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
    pub struct Capabilities: u16 {
        const VALUE = 1;
        const GRAD = 1 << 1;
        const HESS = 1 << 2;
        const HESS_DIAG = 1 << 3;
        const EXACT_EXPECTATION = 1 << 4;
        const GLM = 1 << 5;
        const MINIBATCH = 1 << 6;
        /// Derivatives exist only away from a measure-zero set.
        const NON_SMOOTH = 1 << 7;
    }
}

/// A function to minimize.
///
/// Methods not covered by [`capabilities`](Objective::capabilities) return
/// [`Error::CapabilityMissing`].
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn capabilities(&self) -> Capabilities;

    fn value(&self, theta: &DVector<f64>) -> f64;

    fn gradient(&self, _theta: &DVector<f64>) -> Result<DVector<f64>> {
        Err(Error::CapabilityMissing("gradient"))
    }

    fn hessian(&self, _theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        Err(Error::CapabilityMissing("Hessian"))
    }

    fn hessian_diag(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        self.hessian(theta).map(|h| h.diagonal())
    }

    fn exact(&self) -> Option<&dyn ExactExpectation> {
        None
    }

    fn glm(&self) -> Option<&dyn GlmStructure> {
        None
    }

    fn minibatch(&self) -> Option<&dyn Minibatch> {
        None
    }

    /// Weight `w` of an entropy term in the loss `E_q[f] − w·H(q)`.
    fn entropy_weight(&self) -> f64 {
        0.0
    }

    fn as_lasso(&self) -> Option<&Lasso> {
        None
    }

    fn has(&self, caps: Capabilities) -> bool {
        self.capabilities().contains(caps)
    }
}

/// Closed forms for `L(μ, Σ) = E_q[f]` and its gradients.
pub trait ExactExpectation: Send + Sync {
    fn expected_value(&self, q: &GaussianState) -> Result<f64>;

    fn grad_mean(&self, q: &GaussianState) -> Result<DVector<f64>>;

    /// Symmetric gradient with respect to `Σ`. For mean-field `q` only the
    /// diagonal is used by callers.
    fn grad_cov(&self, q: &GaussianState) -> Result<DMatrix<f64>>;
}

/// First and second derivative of a per-example link loss `ℓ(z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkDerivatives {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// `f(θ) = c·Σᵢ ℓᵢ(xᵢᵀθ) + λ‖θ‖²`.
pub trait GlmStructure: Send + Sync {
    /// Rows are the `xᵢ`.
    fn design(&self) -> &DMatrix<f64>;

    /// The factor `c` in front of the data term.
    fn example_scale(&self) -> f64;

    fn link(&self, i: usize, z: f64) -> LinkDerivatives;

    fn ridge(&self) -> f64;
}

/// Objectives that are sums over examples.
pub trait Minibatch: Send + Sync {
    fn num_examples(&self) -> usize;

    /// The data term restricted to `indices`, rescaled by `N/|indices|` so that
    /// it is unbiased for the full sum. Regularizers are not rescaled.
    fn batch(&self, indices: &[usize]) -> Result<Box<dyn Objective>>;
}

pub(crate) fn check_reg(reg: f64) -> Result<()> {
    if reg >= 0.0 && reg.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeRegularization(reg))
    }
}

pub(crate) fn check_batch(indices: &[usize], n: usize) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::BadParams("minibatch is empty".into()));
    }
    if let Some(&i) = indices.iter().find(|&&i| i >= n) {
        return Err(Error::BadParams(format!("example {i} out of range 0..{n}")));
    }
    Ok(())
}

/// Logistic sigmoid, stable for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + eᶻ)`.
pub fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}
