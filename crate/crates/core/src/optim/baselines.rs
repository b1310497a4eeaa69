//! Point-estimate baselines: Newton, AdaGrad and iterative ridge for the lasso.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{eigen_floor, Ldl};
use crate::objectives::{make_lasso, Lasso, Objective};

/// Eigenvalue floor used when a Newton Hessian is not positive definite.
pub const NEWTON_FLOOR: f64 = 1e-8;

/// Default AdaGrad denominator offset.
pub const ADAGRAD_EPS: f64 = 1e-8;

/// Default lower bound on `|θ_d|` in the iterative-ridge weights.
pub const IRIDGE_FLOOR: f64 = 1e-8;

/// `θ − ρ·H⁻¹g`; an indefinite `H` has its eigenvalues floored first.
pub fn newton_step(
    theta: &DVector<f64>,
    grad: &DVector<f64>,
    hess: &DMatrix<f64>,
    rho: f64,
) -> Result<DVector<f64>> {
    let d = theta.len();
    if grad.len() != d || hess.nrows() != d || hess.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: grad.len().max(hess.nrows()),
        });
    }
    let definite = |h: &DMatrix<f64>| {
        Ldl::new(h)
            .ok()
            .filter(|l| l.pivots().iter().all(|p| *p > 0.0))
    };
    let ldl = match definite(hess) {
        Some(l) => l,
        None => definite(&eigen_floor(hess, NEWTON_FLOOR)?).ok_or(Error::SafeguardExhausted(0))?,
    };
    Ok(theta - ldl.solve(grad) * rho)
}

/// `s' = s + g⊙g`, `θ' = θ − ρ·g/(√s' + ε)`.
pub fn adagrad_step(
    theta: &DVector<f64>,
    accum: &DVector<f64>,
    grad: &DVector<f64>,
    rho: f64,
    eps: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let d = theta.len();
    if accum.len() != d || grad.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: accum.len().max(grad.len()),
        });
    }
    if accum.iter().any(|s| *s < 0.0) {
        return Err(Error::BadParams("AdaGrad accumulator is negative".into()));
    }
    let s = accum + grad.component_mul(grad);
    let theta = DVector::from_fn(d, |k, _| theta[k] - rho * grad[k] / (s[k].sqrt() + eps));
    Ok((theta, s))
}

/// Least-squares start for [`iridge_step`].
pub fn least_squares(lasso: &Lasso) -> Result<DVector<f64>> {
    let ldl = Ldl::new(lasso.gram())?;
    Ok(ldl.solve(&lasso.features().tr_mul(lasso.targets())))
}

/// One reweighted ridge solve,
/// `θ' = (XᵀX + λ/(2c)·diag(1/max(|θ_d|, floor)))⁻¹ Xᵀy`,
/// for the objective `c‖y − Xθ‖² + λ‖θ‖₁`.
pub fn iridge_step(lasso: &Lasso, theta: &DVector<f64>, floor: f64) -> Result<DVector<f64>> {
    if !(floor > 0.0) {
        return Err(Error::BadParams("iterative-ridge floor must be positive".into()));
    }
    let mut a = lasso.gram().clone();
    let weight = lasso.reg_strength() / (2.0 * lasso.scale());
    for k in 0..theta.len() {
        a[(k, k)] += weight / theta[k].abs().max(floor);
    }
    Ok(Ldl::new(&a)?.solve(&lasso.features().tr_mul(lasso.targets())))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IRidgeSolution {
    pub theta: DVector<f64>,
    pub iterations: usize,
}

/// Iterative ridge from the least-squares solution until `‖Δθ‖ < tol`.
///
/// Coordinates the penalty has pinned below `floor` are set to exactly zero
/// at the end, unless that raises the objective.
pub fn iridge_solve(
    data: &Dataset,
    reg_strength: f64,
    max_iters: usize,
    tol: f64,
    floor: f64,
) -> Result<IRidgeSolution> {
    let lasso = make_lasso(data, reg_strength)?;
    let mut theta = least_squares(&lasso)?;
    for it in 1..=max_iters {
        let next = iridge_step(&lasso, &theta, floor)?;
        let delta = (&next - &theta).norm();
        theta = next;
        if delta < tol {
            let mut snapped = theta.map(|v| if v.abs() <= floor { 0.0 } else { v });
            if lasso.value(&snapped) > lasso.value(&theta) {
                snapped = theta;
            }
            return Ok(IRidgeSolution {
                theta: snapped,
                iterations: it,
            });
        }
    }
    Err(Error::MaxItersExceeded(max_iters))
}
