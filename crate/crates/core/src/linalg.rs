//! Dense symmetric helpers shared by the distribution and optimizer code.
//!
//! Precision and covariance matrices are factored with a root-free
//! Cholesky (LDLᵀ) so that the one-dimensional case reduces to plain
//! division, and diagonal matrices factor without any rounding.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Pivots at or below this magnitude are treated as singular.
pub const MIN_PIVOT: f64 = 1e-300;

/// Unit lower-triangular `L` and diagonal `D` with `A = L D Lᵀ`.
#[derive(Clone, Debug)]
pub struct Ldl {
    lower: DMatrix<f64>,
    pivots: DVector<f64>,
}

impl Ldl {
    /// Factor a symmetric matrix, failing unless every pivot is positive.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: a.ncols(),
            });
        }
        let mut lower = DMatrix::identity(n, n);
        let mut pivots = DVector::zeros(n);
        for j in 0..n {
            let mut dj = a[(j, j)];
            for k in 0..j {
                dj -= lower[(j, k)] * lower[(j, k)] * pivots[k];
            }
            if !dj.is_finite() || dj <= MIN_PIVOT {
                return Err(Error::FactorizationFailure(format!(
                    "pivot {j} is {dj:e}"
                )));
            }
            pivots[j] = dj;
            for i in (j + 1)..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= lower[(i, k)] * lower[(j, k)] * pivots[k];
                }
                lower[(i, j)] = v / dj;
            }
        }
        Ok(Self { lower, pivots })
    }

    pub fn dim(&self) -> usize {
        self.pivots.len()
    }

    pub fn pivots(&self) -> &DVector<f64> {
        &self.pivots
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = b.clone();
        for i in 0..n {
            let mut v = x[i];
            for k in 0..i {
                v -= self.lower[(i, k)] * x[k];
            }
            x[i] = v;
        }
        for i in 0..n {
            x[i] /= self.pivots[i];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in (i + 1)..n {
                v -= self.lower[(k, i)] * x[k];
            }
            x[i] = v;
        }
        x
    }

    /// Inverse of the factored matrix, symmetrized.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            inv.set_column(j, &self.solve(&e));
        }
        symmetrize(&mut inv);
        inv
    }

    pub fn log_det(&self) -> f64 {
        self.pivots.iter().map(|d| d.ln()).sum()
    }
}

/// `M ← (M + Mᵀ)/2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let n = m.nrows();
    (0..n).all(|i| (i + 1..n).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= rel_tol * scale))
}

/// Replace every eigenvalue below `floor` by `floor`.
pub fn eigen_floor(m: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("eigenvalue floor input"));
    }
    let eig = SymmetricEigen::new(m.clone());
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let mut out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    symmetrize(&mut out);
    Ok(out)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
