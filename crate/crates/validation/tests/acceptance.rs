//! Acceptance criteria. Prints one line per criterion and exits non-zero if
//! any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use van::active::{active_loop, Acquisition, ActiveConfig};
use van::data::*;
use van::estimator::*;
use van::gaussian::{GaussianState, MeanParams};
use van::linalg::min_eigenvalue;
use van::objectives::*;
use van::optim::*;
use van::rng::RngStream;

use common::{grid_argmin, golden, median, normal_vec, rel_diff_mat, rel_diff_vec, rng, spd, symmetric};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn exact_estimate(g: DVector<f64>, h: DMatrix<f64>) -> ExpectationEstimate {
    ExpectationEstimate {
        avg_grad: g,
        curvature: Curvature::Full(h),
        value: None,
        method: EstimateMethod::Exact,
        samples_used: 0,
        seed: 0,
        std_errors: None,
    }
}

fn natural_equivalence() -> Outcome {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for i in 0..500 {
        let d = [1, 2, 5, 8][i % 4];
        let q = GaussianState::full(normal_vec(&mut r, d), spd(&mut r, d, 0.3)).unwrap();
        let gm = normal_vec(&mut r, d);
        let gs = spd(&mut r, d, 0.05) * 0.5 + symmetric(&mut r, d, 0.01);
        let beta = r.random_range(0.01..1.0);
        let a = van_step(&q, &exact_estimate(gm.clone(), &gs * 2.0), beta, Safeguard::Backtrack).unwrap();
        let b = van_step_natural(&q, &gm, &gs, beta).unwrap();
        worst = worst
            .max(rel_diff_vec(a.mean(), b.mean()))
            .max(rel_diff_mat(&a.covariance(), &b.covariance()));
    }
    outcome(worst < 1e-10, format!("worst relative difference {worst:.2e} over 500 instances"))
}

fn sinc_escape() -> Outcome {
    let (global, _) = grid_argmin(|x| Sinc::eval(x).0, -10.0, 10.0, 1e-3);
    let (local, _) = golden(&|x| Sinc::eval(x).0, -4.0, -3.0);
    let f = make_sinc();
    let mut counts = Vec::new();
    for beta in [0.05, 0.1, 0.2] {
        let mut hits = 0;
        let mut finals = Vec::new();
        for seed in 0..20 {
            let cfg = OptimizerConfig::new(Method::Van)
                .with_step(beta)
                .with_samples(50)
                .with_seed(seed)
                .with_max_iters(2000)
                .with_start(DVector::from_element(1, -3.2), 1.5);
            let mu = run(&f, &cfg).unwrap().solution.mean()[0];
            finals.push(mu);
            if (mu - global.abs()).abs().min((mu + global.abs()).abs()) < 0.2 {
                hits += 1;
            }
        }
        counts.push((beta, hits, median(&mut finals)));
    }
    let newton = run(
        &f,
        &OptimizerConfig::new(Method::Newton).with_start(DVector::from_element(1, -3.2), 1.0),
    )
    .unwrap();
    let theta = newton.solution.mean()[0];
    let van_ok = counts.iter().all(|(_, hits, _)| *hits >= 18);
    let newton_ok = (theta - local).abs() < 0.1;
    let per_beta: Vec<String> = counts
        .iter()
        .map(|(b, h, m)| format!("beta {b}: {h}/20 (median final {m:.3})"))
        .collect();
    outcome(
        van_ok && newton_ok,
        format!(
            "VAN within 0.2 of |argmin| {:.4}: {}; Newton {theta:.5} vs local {local:.5}",
            global.abs(),
            per_beta.join(", ")
        ),
    )
}

fn bonnet_price() -> Outcome {
    let mut r = rng(3);
    let mut quad_worst = 0.0f64;
    for d in 1..=4 {
        let f = make_quadratic(spd(&mut r, d, 0.5), normal_vec(&mut r, d)).unwrap();
        let q = GaussianState::full(normal_vec(&mut r, d), spd(&mut r, d, 0.4)).unwrap();
        let rep = check_bonnet_price(&f, &q, ExpectationRoute::Quadrature { order: 5 }, 1e-4).unwrap();
        quad_worst = quad_worst.max(rep.mean_discrepancy).max(rep.cov_discrepancy);
    }
    let q = GaussianState::full(DVector::from_element(1, -0.7), DMatrix::from_element(1, 1, 0.8)).unwrap();
    let rep = check_bonnet_price(
        &make_sinc(),
        &q,
        ExpectationRoute::MonteCarlo { samples: 1_000_000, seed: 5 },
        1e-3,
    )
    .unwrap();
    let sinc_worst = rep.mean_discrepancy.max(rep.cov_discrepancy);
    outcome(
        quad_worst < 1e-6 && sinc_worst < 1e-2,
        format!("quadratics {quad_worst:.2e}, sinc with common random numbers {sinc_worst:.2e}"),
    )
}

fn reparam_hessian_diag() -> Outcome {
    let mut r = rng(4);
    let a = DVector::from_fn(5, |_, _| r.random_range(0.2..3.0));
    let f = make_quadratic(DMatrix::from_diagonal(&a), normal_vec(&mut r, 5)).unwrap();
    let q = GaussianState::diagonal(normal_vec(&mut r, 5), DVector::from_fn(5, |_, _| r.random_range(0.1..2.0))).unwrap();
    let runs: Vec<DVector<f64>> = (0..200)
        .map(|seed| estimate_hess_diag_reparam(&f, &q, 1000, RngStream::new(seed, 0)).unwrap())
        .collect();
    let n = runs.len() as f64;
    let mut worst = 0.0f64;
    for k in 0..5 {
        let mean = runs.iter().map(|v| v[k]).sum::<f64>() / n;
        let var = runs.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        worst = worst.max((mean - a[k]).abs() / (var / n).sqrt());
    }
    outcome(worst < 5.0, format!("largest deviation {worst:.2} standard errors"))
}

fn lasso_against_iridge() -> Outcome {
    let (data, _) = make_synthetic_regression(500, 20, 0.3, 1.0, 3).unwrap();
    let reg = 10.0;
    let lasso = make_lasso(&data, reg).unwrap();
    let reference = iridge_solve(&data, reg, 1000, 1e-12, IRIDGE_FLOOR).unwrap();
    let fstar = lasso.value(&reference.theta);
    let full = run(
        &lasso,
        &OptimizerConfig::new(Method::Van)
            .with_step(1.0)
            .with_estimator(EstimatorChoice::Exact)
            .with_max_iters(2000),
    )
    .unwrap();
    let rel_full = (lasso.value(full.solution.mean()) - fstar) / fstar.abs();
    let stochastic = run(
        &lasso,
        &OptimizerConfig::new(Method::Van)
            .with_step(0.1)
            .with_estimator(EstimatorChoice::Exact)
            .with_minibatch(BatchSize::Size(30))
            .with_max_iters(50 * 500 / 30)
            .with_seed(1),
    )
    .unwrap();
    let epochs = stochastic.trace.last().unwrap().epoch;
    let rel_stoch = (lasso.value(stochastic.solution.mean()) - fstar) / fstar.abs();
    outcome(
        rel_full.abs() < 1e-4 && rel_stoch.abs() < 1e-2 && epochs <= 50.0,
        format!("VAN {rel_full:.2e}, sVAN {rel_stoch:.2e} after {epochs:.1} epochs"),
    )
}

fn logistic_against_baselines() -> Outcome {
    let mut full_gap = Vec::new();
    let mut diag_gap = Vec::new();
    for seed in 0..5 {
        let data = make_synthetic_blobs(400, 10, 2.0, seed).unwrap();
        let train = data.split(SplitName::Train).unwrap();
        let test = data.split(SplitName::Test).unwrap();
        let f = make_logistic(&train, 1.0).unwrap();
        let loss = |cfg: OptimizerConfig| test_log_loss(run(&f, &cfg).unwrap().solution.mean(), &test).unwrap();
        let newton = loss(OptimizerConfig::new(Method::Newton).with_max_iters(100));
        let van = loss(
            OptimizerConfig::new(Method::Van)
                .with_step(0.5)
                .with_estimator(EstimatorChoice::Quadrature { order: 20 })
                .with_max_iters(500),
        );
        let epochs20 = 20 * train.len() / 10;
        let adagrad = loss(
            OptimizerConfig::new(Method::AdaGrad)
                .with_step(0.1)
                .with_minibatch(BatchSize::Size(10))
                .with_max_iters(epochs20)
                .with_seed(seed),
        );
        let van_d = loss(
            OptimizerConfig::new(Method::VanD)
                .with_step(0.1)
                .with_estimator(EstimatorChoice::Quadrature { order: 20 })
                .with_minibatch(BatchSize::Size(10))
                .with_max_iters(epochs20)
                .with_seed(seed),
        );
        full_gap.push((van - newton).abs());
        diag_gap.push((van_d - adagrad).abs());
    }
    let (a, b) = (median(&mut full_gap), median(&mut diag_gap));
    outcome(
        a < 0.02 && b < 0.05,
        format!("median |VAN − Newton| {a:.4}, median |sVAN-D − AdaGrad| {b:.4}"),
    )
}

fn quadrature_vs_mc() -> Outcome {
    let x = DMatrix::from_row_slice(5, 3, &[1.0, 0.5, -0.3, -0.8, 1.2, 0.4, 0.3, -0.6, 1.1, 1.5, 0.2, -0.9, -0.4, -1.0, 0.7]);
    let y = DVector::from_vec(vec![1.0, -1.0, 1.0, 1.0, -1.0]);
    let f = make_logistic(&Dataset::new(x, y, Task::Classification).unwrap(), 0.3).unwrap();
    let mut r = rng(7);
    let q = GaussianState::full(normal_vec(&mut r, 3), spd(&mut r, 3, 0.3)).unwrap();
    let quad = estimate_quadrature_glm(&f, &q, 20).unwrap();
    let mc = estimate_mc(&f, &q, 1_000_000, RngStream::new(11, 0), HessianMode::Full).unwrap();
    let se = mc.std_errors.as_ref().unwrap();
    let mut worst = 0.0f64;
    for k in 0..3 {
        worst = worst.max((quad.avg_grad[k] - mc.avg_grad[k]).abs() / se.grad[k]);
    }
    let (hq, hm, hs) = (quad.curvature.full().unwrap(), mc.curvature.full().unwrap(), se.curvature.full().unwrap());
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((hq[(i, j)] - hm[(i, j)]).abs() / hs[(i, j)]);
        }
    }
    outcome(worst < 3.0, format!("largest deviation {worst:.2} standard errors"))
}

fn active_learning() -> Outcome {
    let mut active = Vec::new();
    let mut uniform = Vec::new();
    for seed in 0..20 {
        let data = make_synthetic_blobs(1000, 5, 2.0, seed).unwrap();
        let pool = data.split(SplitName::Train).unwrap();
        let test = data.split(SplitName::Test).unwrap();
        let mut cfg = ActiveConfig {
            beta: 0.1,
            batch_size: 10,
            rounds: 40,
            seed,
            ..Default::default()
        };
        let reach = |cfg: &ActiveConfig| {
            active_loop(&pool, &test, cfg)
                .unwrap()
                .examples_to_reach(0.4)
                .map_or(f64::INFINITY, |n| n as f64)
        };
        active.push(reach(&cfg));
        cfg.acquisition = Acquisition::Uniform;
        uniform.push(reach(&cfg));
    }
    let (a, u) = (median(&mut active), median(&mut uniform));
    outcome(a <= u, format!("median examples to reach 0.4: entropy {a}, uniform {u}"))
}

fn conjugate_vi() -> Outcome {
    let mut r = rng(9);
    let (noise_var, prior_var) = (0.5f64, 2.0);
    let x = DMatrix::from_fn(30, 3, |_, _| r.sample::<f64, _>(StandardNormal));
    let y = &x * normal_vec(&mut r, 3) + normal_vec(&mut r, 30) * noise_var.sqrt();
    let precision = x.transpose() * &x / noise_var + DMatrix::identity(3, 3) / prior_var;
    let post_cov = precision.clone().try_inverse().unwrap();
    let post_mean = &post_cov * (x.transpose() * &y) / noise_var;
    let joint = make_quadratic(precision, post_mean.clone()).unwrap();
    let f = make_vi_objective(Box::new(joint)).unwrap();
    let out = run(
        &f,
        &OptimizerConfig::new(Method::Van)
            .with_step(1.0)
            .with_estimator(EstimatorChoice::Exact)
            .with_max_iters(50),
    )
    .unwrap();
    let q = out.solution.distribution().unwrap();
    let em = (q.mean() - &post_mean).abs().max();
    let ec = (q.covariance() - &post_cov).abs().max();
    outcome(em < 1e-8 && ec < 1e-8, format!("mean error {em:.2e}, covariance error {ec:.2e}"))
}

fn structural_suite() -> Outcome {
    let mut r = rng(10);
    let mut failures = Vec::new();

    let mut min_eig = f64::INFINITY;
    for i in 0..10_000 {
        let d = 1 + i % 6;
        let q = GaussianState::full(normal_vec(&mut r, d), spd(&mut r, d, 0.1)).unwrap();
        let g = normal_vec(&mut r, d);
        let h = symmetric(&mut r, d, 3.0);
        let beta = r.random_range(0.01..2.0);
        let sg = if i % 2 == 0 { Safeguard::Backtrack } else { Safeguard::EigenFloor(1e-8) };
        match van_step(&q, &exact_estimate(g.clone(), h.clone()), beta, sg) {
            Ok(next) => min_eig = min_eig.min(min_eigenvalue(&next.precision().unwrap())),
            Err(van::Error::SafeguardExhausted(_)) => {}
            Err(e) => failures.push(format!("step error {e}")),
        }
        let qd = GaussianState::diagonal(q.mean().clone(), q.variances()).unwrap();
        match van_d_step(&qd, &g, &h.diagonal(), beta, sg) {
            Ok(next) => min_eig = min_eig.min(next.diag_precision().unwrap().min()),
            Err(van::Error::SafeguardExhausted(_)) => {}
            Err(e) => failures.push(format!("diagonal step error {e}")),
        }
    }
    if !(min_eig > 0.0) {
        failures.push(format!("precision lost definiteness ({min_eig:.2e})"));
    }

    for _ in 0..1000 {
        let d = r.random_range(1..=6);
        let q = GaussianState::full(normal_vec(&mut r, d), spd(&mut r, d, 0.2)).unwrap();
        let g = normal_vec(&mut r, d);
        let mut est = exact_estimate(g.clone(), &g * g.transpose());
        est.method = EstimateMethod::GaussNewton;
        let p0 = q.precision().unwrap();
        let p1 = vag_step(&q, &est, r.random_range(0.01..5.0)).unwrap().precision().unwrap();
        if min_eigenvalue(&(&p1 - &p0)) < -1e-10 * p0.norm() {
            failures.push("VAG precision decreased".into());
            break;
        }
    }

    let f = make_quadratic(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 0.2])), DVector::from_vec(vec![1.0, -2.0, 0.5])).unwrap();
    let base = OptimizerConfig::new(Method::Van)
        .with_estimator(EstimatorChoice::Exact)
        .with_step(0.3)
        .with_max_iters(40)
        .with_start(DVector::zeros(3), 1.5);
    let full = run(&f, &base).unwrap();
    let diag = run(&f, &OptimizerConfig { method: Method::VanD, ..base }).unwrap();
    let gap = (full.solution.mean() - diag.solution.mean()).norm()
        + (full.solution.distribution().unwrap().covariance() - diag.solution.distribution().unwrap().covariance()).norm();
    if gap > 1e-10 {
        failures.push(format!("VAN-D differs from VAN by {gap:.2e}"));
    }

    for _ in 0..1000 {
        let d = r.random_range(1..=8);
        let q = GaussianState::full(normal_vec(&mut r, d), spd(&mut r, d, 0.3)).unwrap();
        let p = q.to_mean_params();
        let back = GaussianState::from_mean_params(&MeanParams { m1: p.m1.clone(), m2: p.m2.clone() }).unwrap();
        let nat = GaussianState::from_natural_params(&q.to_natural_params().unwrap()).unwrap();
        let err = rel_diff_mat(&back.covariance(), &q.covariance()).max(rel_diff_mat(&nat.covariance(), &q.covariance()));
        if err > 1e-8 {
            failures.push(format!("parameter round trip error {err:.2e}"));
            break;
        }
        let other = GaussianState::full(normal_vec(&mut r, d), spd(&mut r, d, 0.3)).unwrap();
        if q.kl_divergence(&other).unwrap() < 0.0 || q.kl_divergence(&q).unwrap().abs() > 1e-10 {
            failures.push("KL divergence sign".into());
            break;
        }
    }

    let blobs = make_synthetic_blobs(100, 4, 1.0, 9).unwrap();
    let logistic = make_logistic(&blobs, 1.0).unwrap();
    for method in [Method::Van, Method::VanD, Method::Vag, Method::Vsgd, Method::AdaGrad] {
        let cfg = OptimizerConfig::new(method)
            .with_samples(5)
            .with_seed(2)
            .with_minibatch(BatchSize::Size(16))
            .with_max_iters(25);
        if run(&logistic, &cfg).unwrap().trace.to_csv() != run(&logistic, &cfg).unwrap().trace.to_csv() {
            failures.push(format!("{} trace not reproducible", method.name()));
        }
    }

    for seed in 0..200 {
        let d = 1 + (seed % 5) as usize;
        let mut x = DMatrix::from_fn(7, d, |_, _| r.sample::<f64, _>(StandardNormal) * 10f64.powi(r.random_range(-20..20)));
        x.iter_mut().for_each(|v| {
            if r.random_bool(0.3) {
                *v = 0.0
            }
        });
        let y = normal_vec(&mut r, 7);
        let data = Dataset::new(x, y, Task::Regression).unwrap();
        let back = parse_libsvm(&format_libsvm(&data), Task::Regression).unwrap();
        if back.features() != data.features() || back.labels() != data.labels() {
            failures.push("LIBSVM round trip".into());
            break;
        }
    }

    let detail = if failures.is_empty() {
        format!("all invariants hold (smallest precision eigenvalue {min_eig:.2e})")
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("natural-parameter equivalence", 5, natural_equivalence),
        ("sinc escape", 30, sinc_escape),
        ("Gaussian gradient identities", 60, bonnet_price),
        ("reparameterized Hessian diagonal", 30, reparam_hessian_diag),
        ("lasso", 60, lasso_against_iridge),
        ("logistic regression", 60, logistic_against_baselines),
        ("quadrature vs Monte Carlo", 30, quadrature_vs_mc),
        ("active learning", 120, active_learning),
        ("conjugate VI", 5, conjugate_vi),
        ("structural invariants", 60, structural_suite),
    ];
    let mut failed = 0;
    for (k, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(*budget);
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name}: {} [{:.2}s of {budget}s]",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
