//! Single updates of the search distribution.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimator::{Curvature, EstimateMethod, ExpectationEstimate};
use crate::gaussian::{GaussianState, NaturalParams, MIN_VARIANCE};
use crate::linalg::{eigen_floor, Ldl};

/// Halvings tried by [`Safeguard::Backtrack`] before giving up.
pub const MAX_HALVINGS: usize = 30;

/// Variance floor applied by [`vsgd_step`].
pub const VSGD_FLOOR: f64 = 1e-8;

/// What to do when a precision update is not positive definite.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Safeguard {
    /// Halve β and retry, at most [`MAX_HALVINGS`] times.
    #[default]
    Backtrack,
    /// Clamp eigenvalues of the new precision from below.
    EigenFloor(f64),
}

fn positive_definite(p: &DMatrix<f64>) -> Option<Ldl> {
    if p.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let ldl = Ldl::new(p).ok()?;
    ldl.pivots().iter().all(|d| *d > 0.0).then_some(ldl)
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Full-covariance update in precision form. Returns the new mean and precision.
///
/// `P' = P + β·H`, then `μ' = μ − β·P'⁻¹g`, with the new precision scaling the step.
pub fn van_update(
    mean: &DVector<f64>,
    precision: &DMatrix<f64>,
    grad: &DVector<f64>,
    hess: &DMatrix<f64>,
    beta: f64,
    safeguard: Safeguard,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = mean.len();
    check_len(d, precision.nrows())?;
    check_len(d, grad.len())?;
    check_len(d, hess.nrows())?;
    let mut beta = beta;
    let (p_new, ldl) = match safeguard {
        Safeguard::Backtrack => {
            let mut halvings = 0;
            loop {
                let p = precision + hess * beta;
                if let Some(ldl) = positive_definite(&p) {
                    break (p, ldl);
                }
                if halvings == MAX_HALVINGS {
                    return Err(Error::SafeguardExhausted(MAX_HALVINGS));
                }
                halvings += 1;
                beta *= 0.5;
            }
        }
        Safeguard::EigenFloor(eps) => {
            let mut p = precision + hess * beta;
            let ldl = match positive_definite(&p) {
                Some(ldl) => ldl,
                None => {
                    p = eigen_floor(&p, eps)?;
                    positive_definite(&p).ok_or(Error::SafeguardExhausted(0))?
                }
            };
            (p, ldl)
        }
    };
    let mean_new = mean - ldl.solve(grad) * beta;
    Ok((mean_new, p_new))
}

/// Mean-field update: `s' = s + β·h`, then `μ' = μ − β·g/s'`.
pub fn van_d_update(
    mean: &DVector<f64>,
    precision: &DVector<f64>,
    grad: &DVector<f64>,
    hess_diag: &DVector<f64>,
    beta: f64,
    safeguard: Safeguard,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let d = mean.len();
    check_len(d, precision.len())?;
    check_len(d, grad.len())?;
    check_len(d, hess_diag.len())?;
    let valid = |s: &DVector<f64>| s.iter().all(|v| v.is_finite() && *v > 0.0);
    let mut beta = beta;
    let s_new = match safeguard {
        Safeguard::Backtrack => {
            let mut halvings = 0;
            loop {
                let s = precision + hess_diag * beta;
                if valid(&s) {
                    break s;
                }
                if halvings == MAX_HALVINGS {
                    return Err(Error::SafeguardExhausted(MAX_HALVINGS));
                }
                halvings += 1;
                beta *= 0.5;
            }
        }
        Safeguard::EigenFloor(eps) => {
            let s = (precision + hess_diag * beta).map(|v| if v >= eps { v } else { eps });
            if !valid(&s) {
                return Err(Error::NonFiniteValue("diagonal precision"));
            }
            s
        }
    };
    let mean_new = DVector::from_fn(d, |k, _| mean[k] - beta * (grad[k] / s_new[k]));
    Ok((mean_new, s_new))
}

fn curvature_matrix(est: &ExpectationEstimate) -> Result<DMatrix<f64>> {
    match &est.curvature {
        Curvature::Full(h) => Ok(h.clone()),
        Curvature::Diagonal(h) => Ok(DMatrix::from_diagonal(h)),
        Curvature::Absent => Err(Error::BadParams("estimate carries no curvature".into())),
    }
}

/// One VAN step. Mean-field states take the diagonal path.
pub fn van_step(
    q: &GaussianState,
    est: &ExpectationEstimate,
    beta: f64,
    safeguard: Safeguard,
) -> Result<GaussianState> {
    if q.is_diagonal() {
        let h = est
            .curvature
            .diagonal()
            .ok_or_else(|| Error::BadParams("estimate carries no curvature".into()))?;
        return van_d_step(q, &est.avg_grad, &h, beta, safeguard);
    }
    let hess = curvature_matrix(est)?;
    let (mean, precision) = van_update(q.mean(), &q.precision()?, &est.avg_grad, &hess, beta, safeguard)?;
    GaussianState::from_precision(mean, &precision)
}

/// VAN step written literally as natural-parameter descent with the gradient
/// taken in mean parameters:
/// `∇_{m₁} = ∇_μL − 2(∇_ΣL)μ`, `∇_{M₂} = ∇_ΣL`, `λ' = λ − β·∇_m`.
pub fn van_step_natural(
    q: &GaussianState,
    grad_mu: &DVector<f64>,
    grad_sigma: &DMatrix<f64>,
    beta: f64,
) -> Result<GaussianState> {
    let d = q.dim();
    check_len(d, grad_mu.len())?;
    check_len(d, grad_sigma.nrows())?;
    check_len(d, grad_sigma.ncols())?;
    if !crate::linalg::is_symmetric(grad_sigma, 1e-12) {
        return Err(Error::BadParams("covariance gradient is not symmetric".into()));
    }
    let lam = q.to_natural_params()?;
    let grad_m1 = grad_mu - grad_sigma * q.mean() * 2.0;
    let next = NaturalParams {
        lam1: &lam.lam1 - grad_m1 * beta,
        lam2: &lam.lam2 - grad_sigma * beta,
    };
    let out = GaussianState::from_natural_params(&next)?;
    if q.is_diagonal() {
        GaussianState::diagonal(out.mean().clone(), out.variances())
    } else {
        Ok(out)
    }
}

/// VAN step with a Gauss–Newton curvature estimate; the increment is PSD so
/// the precision never loses definiteness.
pub fn vag_step(q: &GaussianState, est: &ExpectationEstimate, beta: f64) -> Result<GaussianState> {
    if est.method != EstimateMethod::GaussNewton {
        return Err(Error::BadParams("VAG needs a Gauss-Newton estimate".into()));
    }
    van_step(q, est, beta, Safeguard::Backtrack)
}

/// Mean-field VAN step on a diagonal state.
pub fn van_d_step(
    q: &GaussianState,
    avg_grad: &DVector<f64>,
    hess_diag: &DVector<f64>,
    beta: f64,
    safeguard: Safeguard,
) -> Result<GaussianState> {
    if !q.is_diagonal() {
        return Err(Error::BadParams("VAN-D needs a diagonal state".into()));
    }
    let (mean, s) = van_d_update(q.mean(), &q.diag_precision()?, avg_grad, hess_diag, beta, safeguard)?;
    GaussianState::from_diag_precision(mean, &s)
}

/// Plain gradient step on `(μ, Σ)` followed by an eigenvalue floor on `Σ`.
pub fn vsgd_step(
    q: &GaussianState,
    grad_mu: &DVector<f64>,
    grad_sigma: &DMatrix<f64>,
    rho: f64,
) -> Result<GaussianState> {
    let d = q.dim();
    check_len(d, grad_mu.len())?;
    check_len(d, grad_sigma.nrows())?;
    let mean = q.mean() - grad_mu * rho;
    if q.is_diagonal() {
        let v = DVector::from_fn(d, |k, _| {
            let v = q.variances()[k] - rho * grad_sigma[(k, k)];
            if v >= VSGD_FLOOR { v } else { VSGD_FLOOR }
        });
        return GaussianState::diagonal(mean, v);
    }
    let cov = q.covariance() - grad_sigma * rho;
    let cov = match positive_definite(&cov) {
        Some(_) if crate::linalg::min_eigenvalue(&cov) >= VSGD_FLOOR => cov,
        _ => eigen_floor(&cov, VSGD_FLOOR.max(MIN_VARIANCE))?,
    };
    GaussianState::full(mean, cov)
}
