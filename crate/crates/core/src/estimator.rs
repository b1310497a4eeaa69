//! Estimates of `E_q[∇f]` and `E_q[∇²f]` (full, diagonal or Gauss–Newton).
//!
//! Every reduction runs in sample order over fixed-size chunks, so results are
//! bit-identical for a given `(objective, q, S, seed)` whatever the thread count.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{Draws, GaussianState};
use crate::objectives::{Capabilities, Objective};
use crate::quadrature::GaussHermite;
use crate::rng::{RngStream, CHUNK_ROWS};

/// Reparameterized Hessian estimates refuse standard deviations below this.
pub const MIN_SD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum Curvature {
    Full(DMatrix<f64>),
    Diagonal(DVector<f64>),
    Absent,
}

impl Curvature {
    pub fn full(&self) -> Option<&DMatrix<f64>> {
        match self {
            Curvature::Full(m) => Some(m),
            _ => None,
        }
    }

    pub fn diagonal(&self) -> Option<DVector<f64>> {
        match self {
            Curvature::Full(m) => Some(m.diagonal()),
            Curvature::Diagonal(v) => Some(v.clone()),
            Curvature::Absent => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimateMethod {
    Exact,
    Quadrature,
    MonteCarlo,
    GaussNewton,
}

/// Which second-order quantity a Monte-Carlo estimate carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HessianMode {
    /// Averaged pointwise Hessian.
    Full,
    /// Averaged pointwise Hessian diagonal.
    Diag,
    /// Diagonal from gradients only, `E[∇_d f · ε_d / σ_d]` (mean-field `q`).
    DiagReparam,
    /// Averaged gradient outer product.
    GaussNewton,
    /// Averaged squared gradient.
    GaussNewtonDiag,
    None,
}

/// Per-entry standard errors of a Monte-Carlo estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct StdErrors {
    pub grad: DVector<f64>,
    pub curvature: Curvature,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpectationEstimate {
    pub avg_grad: DVector<f64>,
    pub curvature: Curvature,
    /// Estimate of the loss `E_q[f] − w·H(q)`, when available.
    pub value: Option<f64>,
    pub method: EstimateMethod,
    pub samples_used: usize,
    pub seed: u64,
    pub std_errors: Option<StdErrors>,
}

fn require(obj: &dyn Objective, caps: Capabilities, name: &'static str) -> Result<()> {
    if obj.has(caps) {
        Ok(())
    } else {
        Err(Error::CapabilityMissing(name))
    }
}

fn check_dim(obj: &dyn Objective, q: &GaussianState) -> Result<()> {
    if obj.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            found: q.dim(),
        });
    }
    Ok(())
}

/// Running sums for one chunk of samples.
#[derive(Clone)]
struct Sums {
    value: f64,
    value_sq: f64,
    grad: DVector<f64>,
    grad_sq: DVector<f64>,
    curv: Vec<f64>,
    curv_sq: Vec<f64>,
}

impl Sums {
    fn new(d: usize, curv_len: usize) -> Self {
        Self {
            value: 0.0,
            value_sq: 0.0,
            grad: DVector::zeros(d),
            grad_sq: DVector::zeros(d),
            curv: vec![0.0; curv_len],
            curv_sq: vec![0.0; curv_len],
        }
    }

    fn merge(&mut self, other: &Sums) {
        self.value += other.value;
        self.value_sq += other.value_sq;
        self.grad += &other.grad;
        self.grad_sq += &other.grad_sq;
        for (a, b) in self.curv.iter_mut().zip(&other.curv) {
            *a += b;
        }
        for (a, b) in self.curv_sq.iter_mut().zip(&other.curv_sq) {
            *a += b;
        }
    }
}

fn curvature_len(mode: HessianMode, d: usize) -> usize {
    match mode {
        HessianMode::Full | HessianMode::GaussNewton => d * d,
        HessianMode::Diag | HessianMode::DiagReparam | HessianMode::GaussNewtonDiag => d,
        HessianMode::None => 0,
    }
}

fn std_error(sum: f64, sum_sq: f64, n: f64) -> f64 {
    if n < 2.0 {
        return f64::NAN;
    }
    let mean = sum / n;
    ((sum_sq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt()
}

/// Monte-Carlo estimate from `samples` reparameterized draws of `q`.
///
/// Gradient, curvature and value share one batch of draws.
pub fn estimate_mc(
    obj: &dyn Objective,
    q: &GaussianState,
    samples: usize,
    stream: RngStream,
    mode: HessianMode,
) -> Result<ExpectationEstimate> {
    check_dim(obj, q)?;
    let draws = q.sample(stream, samples)?;
    let mut est = mc_from_draws(obj, q, &draws, mode)?;
    est.seed = stream.seed;
    apply_entropy(obj, q, &mut est)?;
    Ok(est)
}

/// `E_q[∇²_{θ_d θ_d} f]` from gradients alone, for mean-field `q`.
pub fn estimate_hess_diag_reparam(
    obj: &dyn Objective,
    q: &GaussianState,
    samples: usize,
    stream: RngStream,
) -> Result<DVector<f64>> {
    check_dim(obj, q)?;
    let draws = q.sample(stream, samples)?;
    let est = mc_from_draws(obj, q, &draws, HessianMode::DiagReparam)?;
    Ok(est.curvature.diagonal().expect("diagonal curvature"))
}

fn mc_from_draws(
    obj: &dyn Objective,
    q: &GaussianState,
    draws: &Draws,
    mode: HessianMode,
) -> Result<ExpectationEstimate> {
    require(obj, Capabilities::GRAD, "gradient")?;
    match mode {
        HessianMode::Full => require(obj, Capabilities::HESS, "Hessian")?,
        HessianMode::Diag => require(obj, Capabilities::HESS_DIAG, "Hessian diagonal")?,
        _ => {}
    }
    let d = q.dim();
    let inv_sd = if mode == HessianMode::DiagReparam {
        if !q.is_diagonal() {
            return Err(Error::BadParams(
                "reparameterized Hessian diagonal needs a mean-field distribution".into(),
            ));
        }
        let sd = q.variances().map(f64::sqrt);
        if let Some(index) = sd.iter().position(|s| *s < MIN_SD) {
            return Err(Error::DegenerateVariance {
                index,
                sigma: sd[index],
            });
        }
        sd.map(|s| 1.0 / s)
    } else {
        DVector::zeros(0)
    };

    let s_total = draws.len();
    let clen = curvature_len(mode, d);
    let chunk_sums: Vec<Result<Sums>> = (0..s_total.div_ceil(CHUNK_ROWS))
        .into_par_iter()
        .map(|c| {
            let mut acc = Sums::new(d, clen);
            let mut curv = vec![0.0; clen];
            for s in c * CHUNK_ROWS..((c + 1) * CHUNK_ROWS).min(s_total) {
                let theta = draws.theta(s);
                let f = obj.value(&theta);
                let g = obj.gradient(&theta)?;
                match mode {
                    HessianMode::Full => {
                        curv.copy_from_slice(obj.hessian(&theta)?.as_slice());
                    }
                    HessianMode::Diag => {
                        curv.copy_from_slice(obj.hessian_diag(&theta)?.as_slice());
                    }
                    HessianMode::DiagReparam => {
                        for k in 0..d {
                            curv[k] = g[k] * draws.noise[(s, k)] * inv_sd[k];
                        }
                    }
                    HessianMode::GaussNewton => {
                        curv.copy_from_slice((&g * g.transpose()).as_slice());
                    }
                    HessianMode::GaussNewtonDiag => {
                        for k in 0..d {
                            curv[k] = g[k] * g[k];
                        }
                    }
                    HessianMode::None => {}
                }
                if !f.is_finite()
                    || g.iter().any(|v| !v.is_finite())
                    || curv.iter().any(|v| !v.is_finite())
                {
                    return Err(Error::NonFiniteValue("objective at a sampled point"));
                }
                acc.value += f;
                acc.value_sq += f * f;
                acc.grad += &g;
                acc.grad_sq += g.component_mul(&g);
                for k in 0..clen {
                    acc.curv[k] += curv[k];
                    acc.curv_sq[k] += curv[k] * curv[k];
                }
            }
            Ok(acc)
        })
        .collect();

    let mut total = Sums::new(d, clen);
    for chunk in chunk_sums {
        total.merge(&chunk?);
    }
    let n = s_total as f64;
    let avg_grad = &total.grad / n;
    let grad_se = DVector::from_fn(d, |k, _| std_error(total.grad[k], total.grad_sq[k], n));
    let curv_mean: Vec<f64> = total.curv.iter().map(|v| v / n).collect();
    let curv_se: Vec<f64> = total
        .curv
        .iter()
        .zip(&total.curv_sq)
        .map(|(a, b)| std_error(*a, *b, n))
        .collect();
    let (curvature, curvature_se) = match mode {
        HessianMode::Full | HessianMode::GaussNewton => {
            let mut m = DMatrix::from_vec(d, d, curv_mean);
            crate::linalg::symmetrize(&mut m);
            (Curvature::Full(m), Curvature::Full(DMatrix::from_vec(d, d, curv_se)))
        }
        HessianMode::Diag | HessianMode::DiagReparam | HessianMode::GaussNewtonDiag => (
            Curvature::Diagonal(DVector::from_vec(curv_mean)),
            Curvature::Diagonal(DVector::from_vec(curv_se)),
        ),
        HessianMode::None => (Curvature::Absent, Curvature::Absent),
    };
    let method = match mode {
        HessianMode::GaussNewton | HessianMode::GaussNewtonDiag => EstimateMethod::GaussNewton,
        _ => EstimateMethod::MonteCarlo,
    };
    Ok(ExpectationEstimate {
        avg_grad,
        curvature,
        value: Some(total.value / n),
        method,
        samples_used: s_total,
        seed: 0,
        std_errors: Some(StdErrors {
            grad: grad_se,
            curvature: curvature_se,
            value: std_error(total.value, total.value_sq, n),
        }),
    })
}

/// Closed-form expectations through the objective's engine, mapped to
/// averaged gradient and Hessian with `E[∇f] = ∇_μ L` and `E[∇²f] = 2∇_Σ L`.
pub fn estimate_exact(obj: &dyn Objective, q: &GaussianState) -> Result<ExpectationEstimate> {
    check_dim(obj, q)?;
    let engine = obj
        .exact()
        .ok_or(Error::CapabilityMissing("exact expectation"))?;
    let avg_grad = engine.grad_mean(q)?;
    let grad_cov = engine.grad_cov(q)?;
    let curvature = if q.is_diagonal() {
        Curvature::Diagonal(grad_cov.diagonal() * 2.0)
    } else {
        let mut h = grad_cov * 2.0;
        crate::linalg::symmetrize(&mut h);
        Curvature::Full(h)
    };
    let mut est = ExpectationEstimate {
        avg_grad,
        curvature,
        value: Some(engine.expected_value(q)?),
        method: EstimateMethod::Exact,
        samples_used: 0,
        seed: 0,
        std_errors: None,
    };
    apply_entropy(obj, q, &mut est)?;
    Ok(est)
}

/// Expectations for objectives of the form `c·Σᵢ ℓᵢ(xᵢᵀθ) + λ‖θ‖²`.
///
/// Each `zᵢ = xᵢᵀθ` is normal under `q`, so every data term reduces to a
/// one-dimensional Gauss–Hermite rule of the given order.
pub fn estimate_quadrature_glm(
    obj: &dyn Objective,
    q: &GaussianState,
    order: usize,
) -> Result<ExpectationEstimate> {
    check_dim(obj, q)?;
    let glm = obj.glm().ok_or(Error::CapabilityMissing("GLM structure"))?;
    if order < 3 {
        return Err(Error::BadParams(format!("quadrature order {order} is below 3")));
    }
    let rule = GaussHermite::new(order)?;
    let x = glm.design();
    let (n, d) = x.shape();
    let mu = q.mean();
    let cov = q.covariance();
    let means = x * mu;
    let spreads = (x * &cov).component_mul(x).column_sum();

    let mut value = 0.0;
    let mut grad_w = DVector::zeros(n);
    let mut hess_w = DVector::zeros(n);
    for i in 0..n {
        let sd = spreads[i].max(0.0).sqrt();
        let (mut e0, mut e1, mut e2) = (0.0, 0.0, 0.0);
        for (node, w) in rule.nodes().iter().zip(rule.weights()) {
            let l = glm.link(i, means[i] + sd * node);
            e0 += w * l.value;
            e1 += w * l.d1;
            e2 += w * l.d2;
        }
        value += e0;
        grad_w[i] = e1;
        hess_w[i] = e2;
    }
    let c = glm.example_scale();
    let ridge = glm.ridge();
    let avg_grad = x.tr_mul(&grad_w) * c + mu * (2.0 * ridge);
    let curvature = if q.is_diagonal() {
        Curvature::Diagonal(DVector::from_fn(d, |k, _| {
            c * (0..n).map(|i| hess_w[i] * x[(i, k)] * x[(i, k)]).sum::<f64>() + 2.0 * ridge
        }))
    } else {
        let mut weighted = x.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= hess_w[i];
        }
        let mut h = x.tr_mul(&weighted) * c;
        for k in 0..d {
            h[(k, k)] += 2.0 * ridge;
        }
        crate::linalg::symmetrize(&mut h);
        Curvature::Full(h)
    };
    let mut est = ExpectationEstimate {
        avg_grad,
        curvature,
        value: Some(c * value + ridge * (mu.norm_squared() + q.trace_cov())),
        method: EstimateMethod::Quadrature,
        samples_used: 0,
        seed: 0,
        std_errors: None,
    };
    apply_entropy(obj, q, &mut est)?;
    Ok(est)
}

/// Largest tensor-product grid evaluated by [`estimate_tensor_quadrature`].
pub const MAX_TENSOR_POINTS: usize = 2_000_000;

/// Tensor-product Gauss–Hermite expectation over `θ = μ + Lz`; exact for
/// polynomial integrands up to degree `2·order − 1` in each coordinate.
pub fn estimate_tensor_quadrature(
    obj: &dyn Objective,
    q: &GaussianState,
    order: usize,
    mode: HessianMode,
) -> Result<ExpectationEstimate> {
    check_dim(obj, q)?;
    require(obj, Capabilities::GRAD, "gradient")?;
    match mode {
        HessianMode::Full => require(obj, Capabilities::HESS, "Hessian")?,
        HessianMode::Diag => require(obj, Capabilities::HESS_DIAG, "Hessian diagonal")?,
        HessianMode::None => {}
        _ => {
            return Err(Error::BadParams(format!(
                "{mode:?} is not available with tensor quadrature"
            )))
        }
    }
    let d = q.dim();
    let points = (order as u128).pow(d as u32);
    if points > MAX_TENSOR_POINTS as u128 {
        return Err(Error::BadParams(format!("{points} quadrature points exceed the limit")));
    }
    let rule = GaussHermite::new(order)?;
    let l = q.cholesky_factor()?;
    let points = points as usize;
    let clen = curvature_len(mode, d);
    let mut value = 0.0;
    let mut grad = DVector::zeros(d);
    let mut curv = vec![0.0; clen];
    let mut z = DVector::zeros(d);
    for p in 0..points {
        let mut rem = p;
        let mut w = 1.0;
        for k in 0..d {
            let j = rem % order;
            rem /= order;
            z[k] = rule.nodes()[j];
            w *= rule.weights()[j];
        }
        let theta = q.mean() + &l * &z;
        value += w * obj.value(&theta);
        grad += obj.gradient(&theta)? * w;
        match mode {
            HessianMode::Full => {
                for (a, b) in curv.iter_mut().zip(obj.hessian(&theta)?.iter()) {
                    *a += w * b;
                }
            }
            HessianMode::Diag => {
                for (a, b) in curv.iter_mut().zip(obj.hessian_diag(&theta)?.iter()) {
                    *a += w * b;
                }
            }
            _ => {}
        }
    }
    let curvature = match mode {
        HessianMode::Full => {
            let mut m = DMatrix::from_vec(d, d, curv);
            crate::linalg::symmetrize(&mut m);
            Curvature::Full(m)
        }
        HessianMode::Diag => Curvature::Diagonal(DVector::from_vec(curv)),
        _ => Curvature::Absent,
    };
    let mut est = ExpectationEstimate {
        avg_grad: grad,
        curvature,
        value: Some(value),
        method: EstimateMethod::Quadrature,
        samples_used: points,
        seed: 0,
        std_errors: None,
    };
    apply_entropy(obj, q, &mut est)?;
    Ok(est)
}

/// Fold `−w·H(q)` into an estimate of `E_q[f]`: the averaged Hessian loses
/// `w·Σ⁻¹` and the value loses `w·H(q)`.
fn apply_entropy(obj: &dyn Objective, q: &GaussianState, est: &mut ExpectationEstimate) -> Result<()> {
    let w = obj.entropy_weight();
    if w == 0.0 {
        return Ok(());
    }
    match &mut est.curvature {
        Curvature::Full(h) => *h -= q.precision()? * w,
        Curvature::Diagonal(h) => *h -= q.diag_precision()? * w,
        Curvature::Absent => {}
    }
    if let Some(v) = est.value.as_mut() {
        *v -= w * q.entropy()?;
    }
    Ok(())
}

/// How [`check_bonnet_price`] evaluates expectations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExpectationRoute {
    /// One fixed batch of noise reused for every evaluation.
    MonteCarlo { samples: usize, seed: u64 },
    /// Tensor-product Gauss–Hermite.
    Quadrature { order: usize },
}

/// Largest absolute discrepancy for each Gaussian gradient identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BonnetPriceReport {
    /// `max_d |∂L/∂μ_d − E[∇f]_d|`.
    pub mean_discrepancy: f64,
    /// `max_ij |∂L/∂Σ_ij − ½E[∇²f]_ij|`.
    pub cov_discrepancy: f64,
}

/// Check `∇_μ E_q[f] = E_q[∇f]` and `∇_Σ E_q[f] = ½E_q[∇²f]` by central
/// differences of `L(μ, Σ)`. `L` comes from the exact engine when there is
/// one, otherwise from `route`; the right-hand sides always come from `route`.
pub fn check_bonnet_price(
    obj: &dyn Objective,
    q: &GaussianState,
    route: ExpectationRoute,
    fd_step: f64,
) -> Result<BonnetPriceReport> {
    check_dim(obj, q)?;
    require(obj, Capabilities::GRAD, "gradient")?;
    require(obj, Capabilities::HESS, "Hessian")?;
    let d = q.dim();
    if d > 4 {
        return Err(Error::BadParams("identity check supports at most 4 dimensions".into()));
    }
    if !(fd_step > 0.0) {
        return Err(Error::BadParams("finite-difference step must be positive".into()));
    }

    let noise = match route {
        ExpectationRoute::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::BadParams("sample count must be at least 1".into()));
            }
            Some(RngStream::new(seed, 0xb0_77e7).standard_normals(samples, d))
        }
        ExpectationRoute::Quadrature { .. } => None,
    };
    let loss = |g: &GaussianState| -> Result<f64> {
        if let Some(engine) = obj.exact() {
            return engine.expected_value(g);
        }
        match (&noise, route) {
            (Some(eps), _) => {
                let theta = g.transform(eps)?;
                let vals: Vec<f64> = (0..theta.nrows())
                    .into_par_iter()
                    .map(|s| obj.value(&theta.row(s).transpose()))
                    .collect();
                Ok(vals.iter().sum::<f64>() / vals.len() as f64)
            }
            (None, ExpectationRoute::Quadrature { order }) => {
                tensor_value(obj, g, order)
            }
            _ => unreachable!(),
        }
    };
    let rhs = match (&noise, route) {
        (Some(eps), _) => {
            let draws = Draws {
                theta: q.transform(eps)?,
                noise: eps.clone(),
            };
            mc_from_draws(obj, q, &draws, HessianMode::Full)?
        }
        (None, ExpectationRoute::Quadrature { order }) => {
            estimate_tensor_quadrature(obj, q, order, HessianMode::Full)?
        }
        _ => unreachable!(),
    };
    let avg_hess = rhs.curvature.full().expect("full curvature").clone();

    let h = fd_step;
    let mut mean_disc: f64 = 0.0;
    for k in 0..d {
        let mut plus = q.mean().clone();
        let mut minus = q.mean().clone();
        plus[k] += h;
        minus[k] -= h;
        let fd = (loss(&q.with_mean(plus)?)? - loss(&q.with_mean(minus)?)?) / (2.0 * h);
        mean_disc = mean_disc.max((fd - rhs.avg_grad[k]).abs());
    }

    let mut cov_disc: f64 = 0.0;
    let base = q.covariance();
    for i in 0..d {
        for j in i..d {
            if q.is_diagonal() && i != j {
                continue;
            }
            let shifted = |sign: f64| -> Result<GaussianState> {
                if q.is_diagonal() {
                    let mut v = q.variances();
                    v[i] += sign * h;
                    GaussianState::diagonal(q.mean().clone(), v)
                } else {
                    let mut c = base.clone();
                    c[(i, j)] += sign * h;
                    if i != j {
                        c[(j, i)] += sign * h;
                    }
                    GaussianState::full(q.mean().clone(), c)
                }
            };
            let fd = (loss(&shifted(1.0)?)? - loss(&shifted(-1.0)?)?) / (2.0 * h);
            // A symmetric off-diagonal perturbation moves two entries.
            let per_entry = if i == j { fd } else { fd / 2.0 };
            cov_disc = cov_disc.max((per_entry - 0.5 * avg_hess[(i, j)]).abs());
        }
    }
    Ok(BonnetPriceReport {
        mean_discrepancy: mean_disc,
        cov_discrepancy: cov_disc,
    })
}

fn tensor_value(obj: &dyn Objective, q: &GaussianState, order: usize) -> Result<f64> {
    let d = q.dim();
    let rule = GaussHermite::new(order)?;
    let l = q.cholesky_factor()?;
    let points = order.pow(d as u32);
    let mut z = DVector::zeros(d);
    let mut total = 0.0;
    for p in 0..points {
        let mut rem = p;
        let mut w = 1.0;
        for k in 0..d {
            let j = rem % order;
            rem /= order;
            z[k] = rule.nodes()[j];
            w *= rule.weights()[j];
        }
        total += w * obj.value(&(q.mean() + &l * &z));
    }
    Ok(total)
}
