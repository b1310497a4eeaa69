use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{Capabilities, Objective};
use crate::error::Result;

/// Normalized sinc, `f(θ) = sin(πθ)/(πθ)` with `f(0) = 1`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sinc;

pub fn make_sinc() -> Sinc {
    Sinc
}

// Taylor coefficients of sin(u)/u in u², enough for |u| < 1.
const SERIES_TERMS: usize = 9;

impl Sinc {
    /// Value and first two derivatives in θ.
    pub fn eval(theta: f64) -> (f64, f64, f64) {
        let u = PI * theta;
        let (f, du, duu) = if u.abs() < 1.0 {
            series(u)
        } else {
            let (s, c) = u.sin_cos();
            let f = s / u;
            let du = (u * c - s) / (u * u);
            let duu = -s / u - 2.0 * c / (u * u) + 2.0 * s / (u * u * u);
            (f, du, duu)
        };
        (f, du * PI, duu * PI * PI)
    }
}

fn series(u: f64) -> (f64, f64, f64) {
    let u2 = u * u;
    let (mut f, mut d1, mut d2) = (1.0, 0.0, 0.0);
    let mut fact = 1.0; // (2k+1)!
    let mut prev = 1.0; // u^(2k-2)
    for k in 1..SERIES_TERMS {
        let kf = k as f64;
        fact *= (2.0 * kf) * (2.0 * kf + 1.0);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        f += sign * prev * u2 / fact;
        d1 += sign * 2.0 * kf * prev * u / fact;
        d2 += sign * 2.0 * kf * (2.0 * kf - 1.0) * prev / fact;
        prev *= u2;
    }
    (f, d1, d2)
}

impl Objective for Sinc {
    fn dim(&self) -> usize {
        1
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities::VALUE | Capabilities::GRAD | Capabilities::HESS | Capabilities::HESS_DIAG
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        Sinc::eval(theta[0]).0
    }

    fn gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_element(1, Sinc::eval(theta[0]).1))
    }

    fn hessian(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_element(1, 1, Sinc::eval(theta[0]).2))
    }
}
