#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

/// `BBᵀ/d + jitter·I` with Gaussian `B`.
pub fn spd(rng: &mut ChaCha8Rng, d: usize, jitter: f64) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut m = &b * b.transpose() / d as f64;
    for k in 0..d {
        m[(k, k)] += jitter;
    }
    (&m + m.transpose()) * 0.5
}

pub fn symmetric(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
    (&b + b.transpose()) * 0.5
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `E[g(X)]` for `X ~ N(mean, sd²)` by adaptive Simpson over ±12 sd.
pub fn normal_expectation<F: Fn(f64) -> f64>(mean: f64, sd: f64, g: F) -> f64 {
    let pdf = |x: f64| {
        let z = (x - mean) / sd;
        (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
    };
    let h = |x: f64| g(x) * pdf(x);
    // split at the mean so the peak is a node
    simpson(&h, mean - 12.0 * sd, mean, 1e-13) + simpson(&h, mean, mean + 12.0 * sd, 1e-13)
}

/// Minimizer of `f` over a uniform grid, refined by golden-section search
/// within one grid cell on either side.
pub fn grid_argmin<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (lo, f(lo));
    for i in 1..=n {
        let x = lo + i as f64 * step;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    golden(&f, best.0 - step, best.0 + step)
}

/// Local minimizer of `f` on a grid restricted to `[lo, hi]`.
pub fn golden<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn rel_diff_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

pub fn rel_diff_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}
