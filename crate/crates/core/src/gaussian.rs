//! Gaussian search distributions and their exponential-family coordinates.
//!
//! A [`GaussianState`] stores a mean and either a full covariance or a vector
//! of per-coordinate variances. Precision, mean parameters and natural
//! parameters are derived views computed through a symmetric factorization.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, Ldl};
use crate::rng::RngStream;

/// Smallest variance produced when converting a precision to a covariance.
pub const MIN_VARIANCE: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Covariance {
    Full(DMatrix<f64>),
    Diagonal(DVector<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: Covariance,
}

/// Expected sufficient statistics `(μ, Σ + μμᵀ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanParams {
    pub m1: DVector<f64>,
    pub m2: DMatrix<f64>,
}

/// Natural parameters `(Σ⁻¹μ, −½Σ⁻¹)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NaturalParams {
    pub lam1: DVector<f64>,
    pub lam2: DMatrix<f64>,
}

/// Reparameterized draws `θ = μ + Lε` together with the noise that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Draws {
    /// One draw per row.
    pub theta: DMatrix<f64>,
    /// Standard-normal noise, same shape as `theta`.
    pub noise: DMatrix<f64>,
}

impl Draws {
    pub fn len(&self) -> usize {
        self.theta.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn theta(&self, s: usize) -> DVector<f64> {
        self.theta.row(s).transpose()
    }

    pub fn noise(&self, s: usize) -> DVector<f64> {
        self.noise.row(s).transpose()
    }
}

impl GaussianState {
    /// Full-covariance state. Rejects asymmetric or non positive-definite `cov`.
    pub fn full(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        check_dim(mean.len(), cov.nrows())?;
        check_dim(mean.len(), cov.ncols())?;
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("mean"));
        }
        if !linalg::is_symmetric(&cov, SYMMETRY_TOL) {
            return Err(Error::BadParams("covariance is not symmetric".into()));
        }
        let mut cov = cov;
        linalg::symmetrize(&mut cov);
        Ldl::new(&cov)?;
        Ok(Self {
            mean,
            cov: Covariance::Full(cov),
        })
    }

    /// Mean-field state with per-coordinate variances.
    pub fn diagonal(mean: DVector<f64>, variances: DVector<f64>) -> Result<Self> {
        check_dim(mean.len(), variances.len())?;
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("mean"));
        }
        if let Some(d) = variances.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::FactorizationFailure(format!(
                "variance {d} is {}",
                variances[d]
            )));
        }
        Ok(Self {
            mean,
            cov: Covariance::Diagonal(variances),
        })
    }

    /// `N(mean, sigma² I)` with full storage.
    pub fn isotropic(mean: DVector<f64>, sigma: f64) -> Result<Self> {
        let d = mean.len();
        Self::full(mean, DMatrix::identity(d, d) * (sigma * sigma))
    }

    /// Full-covariance state from a precision matrix, `Σ = P⁻¹`.
    pub fn from_precision(mean: DVector<f64>, precision: &DMatrix<f64>) -> Result<Self> {
        check_dim(mean.len(), precision.nrows())?;
        let mut cov = Ldl::new(precision)?.inverse();
        for d in 0..cov.nrows() {
            if cov[(d, d)] < MIN_VARIANCE {
                cov[(d, d)] = MIN_VARIANCE;
            }
        }
        Self::full(mean, cov)
    }

    /// Mean-field state from per-coordinate precisions `s_d = 1/σ_d²`.
    pub fn from_diag_precision(mean: DVector<f64>, precision: &DVector<f64>) -> Result<Self> {
        check_dim(mean.len(), precision.len())?;
        if let Some(d) = precision.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::FactorizationFailure(format!(
                "precision {d} is {}",
                precision[d]
            )));
        }
        let var = precision.map(|s| (1.0 / s).max(MIN_VARIANCE));
        Self::diagonal(mean, var)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance_storage(&self) -> &Covariance {
        &self.cov
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.cov, Covariance::Diagonal(_))
    }

    /// Same covariance, new mean.
    pub fn with_mean(&self, mean: DVector<f64>) -> Result<Self> {
        check_dim(self.dim(), mean.len())?;
        Ok(Self {
            mean,
            cov: self.cov.clone(),
        })
    }

    /// Dense covariance matrix.
    pub fn covariance(&self) -> DMatrix<f64> {
        match &self.cov {
            Covariance::Full(c) => c.clone(),
            Covariance::Diagonal(v) => DMatrix::from_diagonal(v),
        }
    }

    /// Marginal variances `Σ_dd`.
    pub fn variances(&self) -> DVector<f64> {
        match &self.cov {
            Covariance::Full(c) => c.diagonal(),
            Covariance::Diagonal(v) => v.clone(),
        }
    }

    pub fn trace_cov(&self) -> f64 {
        self.variances().sum()
    }

    /// Dense precision matrix `P = Σ⁻¹`.
    pub fn precision(&self) -> Result<DMatrix<f64>> {
        match &self.cov {
            Covariance::Full(c) => Ok(Ldl::new(c)?.inverse()),
            Covariance::Diagonal(v) => Ok(DMatrix::from_diagonal(&v.map(|x| 1.0 / x))),
        }
    }

    /// Per-coordinate precisions of a mean-field state, diagonal of `P` otherwise.
    pub fn diag_precision(&self) -> Result<DVector<f64>> {
        match &self.cov {
            Covariance::Diagonal(v) => Ok(v.map(|x| 1.0 / x)),
            Covariance::Full(_) => Ok(self.precision()?.diagonal()),
        }
    }

    pub fn log_det_cov(&self) -> Result<f64> {
        match &self.cov {
            Covariance::Full(c) => Ok(Ldl::new(c)?.log_det()),
            Covariance::Diagonal(v) => Ok(v.iter().map(|x| x.ln()).sum()),
        }
    }

    /// Differential entropy in nats.
    pub fn entropy(&self) -> Result<f64> {
        let d = self.dim() as f64;
        Ok(0.5 * (d * (1.0 + (2.0 * PI).ln()) + self.log_det_cov()?))
    }

    /// Log density at `theta`.
    pub fn log_pdf(&self, theta: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        let diff = theta - &self.mean;
        let (maha, log_det) = match &self.cov {
            Covariance::Full(c) => {
                let ldl = Ldl::new(c)?;
                (diff.dot(&ldl.solve(&diff)), ldl.log_det())
            }
            Covariance::Diagonal(v) => (
                diff.iter().zip(v.iter()).map(|(x, s)| x * x / s).sum(),
                v.iter().map(|x| x.ln()).sum(),
            ),
        };
        let d = self.dim() as f64;
        Ok(-0.5 * (d * (2.0 * PI).ln() + log_det + maha))
    }

    /// Lower-triangular `L` with `Σ = LLᵀ`.
    pub fn cholesky_factor(&self) -> Result<DMatrix<f64>> {
        match &self.cov {
            Covariance::Full(c) => nalgebra::Cholesky::new(c.clone())
                .map(|ch| ch.l())
                .ok_or_else(|| Error::FactorizationFailure("covariance Cholesky".into())),
            Covariance::Diagonal(v) => Ok(DMatrix::from_diagonal(&v.map(f64::sqrt))),
        }
    }

    /// `count` reparameterized draws from `stream`, keeping the noise.
    pub fn sample(&self, stream: RngStream, count: usize) -> Result<Draws> {
        if count == 0 {
            return Err(Error::BadParams("sample count must be at least 1".into()));
        }
        let noise = stream.standard_normals(count, self.dim());
        let theta = self.transform(&noise)?;
        Ok(Draws { theta, noise })
    }

    /// Map rows of standard-normal noise to draws from this distribution.
    pub fn transform(&self, noise: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), noise.ncols())?;
        let mut theta = match &self.cov {
            Covariance::Full(_) => noise * self.cholesky_factor()?.transpose(),
            Covariance::Diagonal(v) => {
                let sd = v.map(f64::sqrt);
                let mut t = noise.clone();
                for (j, mut col) in t.column_iter_mut().enumerate() {
                    col *= sd[j];
                }
                t
            }
        };
        for mut row in theta.row_iter_mut() {
            row += self.mean.transpose();
        }
        Ok(theta)
    }

    pub fn to_mean_params(&self) -> MeanParams {
        MeanParams {
            m1: self.mean.clone(),
            m2: self.covariance() + &self.mean * self.mean.transpose(),
        }
    }

    /// Inverse of [`to_mean_params`](Self::to_mean_params); always full storage.
    pub fn from_mean_params(p: &MeanParams) -> Result<Self> {
        let mut cov = &p.m2 - &p.m1 * p.m1.transpose();
        linalg::symmetrize(&mut cov);
        Self::full(p.m1.clone(), cov)
    }

    pub fn to_natural_params(&self) -> Result<NaturalParams> {
        let (lam1, prec) = match &self.cov {
            Covariance::Full(c) => {
                let ldl = Ldl::new(c)?;
                (ldl.solve(&self.mean), ldl.inverse())
            }
            Covariance::Diagonal(v) => (
                self.mean.component_div(v),
                DMatrix::from_diagonal(&v.map(|x| 1.0 / x)),
            ),
        };
        Ok(NaturalParams {
            lam1,
            lam2: prec * -0.5,
        })
    }

    /// Inverse of [`to_natural_params`](Self::to_natural_params); always full storage.
    pub fn from_natural_params(p: &NaturalParams) -> Result<Self> {
        check_dim(p.lam1.len(), p.lam2.nrows())?;
        let mut prec = &p.lam2 * -2.0;
        linalg::symmetrize(&mut prec);
        let ldl = Ldl::new(&prec)?;
        if let Some(d) = ldl.pivots().iter().position(|v| *v <= 0.0) {
            return Err(Error::FactorizationFailure(format!(
                "-2·lam2 has pivot {} at index {d}",
                ldl.pivots()[d]
            )));
        }
        let mean = ldl.solve(&p.lam1);
        Self::full(mean, ldl.inverse())
    }

    /// Closed-form `KL(self ‖ reference)`.
    pub fn kl_divergence(&self, reference: &GaussianState) -> Result<f64> {
        check_dim(reference.dim(), self.dim())?;
        if self == reference {
            return Ok(0.0);
        }
        let d = self.dim() as f64;
        let diff = &reference.mean - &self.mean;
        let (trace_term, maha) = match (&self.cov, &reference.cov) {
            (Covariance::Diagonal(q), Covariance::Diagonal(r)) => (
                q.iter().zip(r.iter()).map(|(a, b)| a / b).sum::<f64>(),
                diff.iter().zip(r.iter()).map(|(x, b)| x * x / b).sum(),
            ),
            _ => {
                let ref_ldl = Ldl::new(&reference.covariance())?;
                let solved = ref_ldl.solve(&diff);
                let q = self.covariance();
                let tr = (0..self.dim())
                    .map(|j| ref_ldl.solve(&q.column(j).into_owned())[j])
                    .sum::<f64>();
                (tr, diff.dot(&solved))
            }
        };
        let kl = 0.5 * (trace_term + maha - d + reference.log_det_cov()? - self.log_det_cov()?);
        Ok(kl.max(0.0))
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == 0 {
        return Err(Error::BadParams("dimension must be at least 1".into()));
    }
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
