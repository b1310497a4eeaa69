use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use super::baselines::{adagrad_step, iridge_step, least_squares, newton_step};
use super::steps::{van_d_update, van_step_natural, van_update, vsgd_step};
use super::{BatchSize, EstimatorChoice, Method, OptimizerConfig};
use crate::error::{Error, Result};
use crate::estimator::{
    estimate_exact, estimate_mc, estimate_quadrature_glm, Curvature, ExpectationEstimate, HessianMode,
};
use crate::gaussian::GaussianState;
use crate::objectives::{Capabilities, Objective};
use crate::rng::RngStream;
use crate::trace::{IterationRecord, Trace};

const SAMPLE_STREAM: u64 = 0x5a_3e1e;
const BATCH_STREAM: u64 = 0xba7c;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// `‖E_q[∇f]‖` fell below `tol_grad`.
    GradTolerance,
    /// The mean moved less than `tol_step`.
    StepTolerance,
    MaxIters,
}

impl StopReason {
    pub fn converged(self) -> bool {
        self != StopReason::MaxIters
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Solution {
    Distribution(GaussianState),
    Point(DVector<f64>),
}

impl Solution {
    pub fn mean(&self) -> &DVector<f64> {
        match self {
            Solution::Distribution(q) => q.mean(),
            Solution::Point(p) => p,
        }
    }

    pub fn distribution(&self) -> Option<&GaussianState> {
        match self {
            Solution::Distribution(q) => Some(q),
            Solution::Point(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub solution: Solution,
    pub trace: Trace,
    pub stop: StopReason,
}

enum State {
    Full { q: GaussianState, precision: DMatrix<f64> },
    Diag { q: GaussianState, precision: DVector<f64> },
    Plain { q: GaussianState },
    Point { theta: DVector<f64>, accum: DVector<f64> },
}

impl State {
    fn mean(&self) -> &DVector<f64> {
        match self {
            State::Full { q, .. } | State::Diag { q, .. } | State::Plain { q } => q.mean(),
            State::Point { theta, .. } => theta,
        }
    }

    fn distribution(&self) -> Option<&GaussianState> {
        match self {
            State::Full { q, .. } | State::Diag { q, .. } | State::Plain { q } => Some(q),
            State::Point { .. } => None,
        }
    }

    fn into_solution(self) -> Solution {
        match self {
            State::Full { q, .. } | State::Diag { q, .. } | State::Plain { q } => Solution::Distribution(q),
            State::Point { theta, .. } => Solution::Point(theta),
        }
    }
}

/// Shuffled partition of the examples, redrawn every epoch.
struct Batcher {
    n: usize,
    size: usize,
    order: Vec<usize>,
    pos: usize,
    epoch: u64,
    stream: RngStream,
}

impl Batcher {
    fn new(n: usize, size: usize, seed: u64) -> Self {
        Self {
            n,
            size,
            order: Vec::new(),
            pos: n,
            epoch: 0,
            stream: RngStream::new(seed, BATCH_STREAM),
        }
    }

    fn next(&mut self) -> Vec<usize> {
        if self.pos >= self.n {
            self.order = (0..self.n).collect();
            self.order.shuffle(&mut self.stream.split(self.epoch).rng(0));
            self.epoch += 1;
            self.pos = 0;
        }
        let end = (self.pos + self.size).min(self.n);
        let batch = self.order[self.pos..end].to_vec();
        self.pos = end;
        batch
    }
}

fn initial_state(obj: &dyn Objective, config: &OptimizerConfig) -> Result<State> {
    let d = obj.dim();
    let mean = match &config.mean0 {
        Some(m) if m.len() != d => {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: m.len(),
            })
        }
        Some(m) => m.clone(),
        None => DVector::zeros(d),
    };
    let var = config.sigma0 * config.sigma0;
    Ok(match config.method {
        Method::Van | Method::Vag => State::Full {
            q: GaussianState::full(mean, DMatrix::identity(d, d) * var)?,
            precision: DMatrix::identity(d, d) * (1.0 / var),
        },
        Method::VanD | Method::VagD => State::Diag {
            q: GaussianState::diagonal(mean, DVector::repeat(d, var))?,
            precision: DVector::repeat(d, 1.0 / var),
        },
        Method::VanNatural | Method::Vsgd => State::Plain {
            q: GaussianState::full(mean, DMatrix::identity(d, d) * var)?,
        },
        Method::Newton | Method::AdaGrad => State::Point {
            theta: mean,
            accum: DVector::zeros(d),
        },
        Method::IRidge => {
            let lasso = obj
                .as_lasso()
                .ok_or(Error::CapabilityMissing("lasso structure"))?;
            let theta = match &config.mean0 {
                Some(_) => mean,
                None => least_squares(lasso)?,
            };
            State::Point {
                theta,
                accum: DVector::zeros(d),
            }
        }
    })
}

fn check_compatible(obj: &dyn Objective, config: &OptimizerConfig) -> Result<()> {
    let need = |caps: Capabilities, name: &'static str| {
        if obj.has(caps) {
            Ok(())
        } else {
            Err(Error::CapabilityMissing(name))
        }
    };
    match config.method {
        Method::Newton => {
            need(Capabilities::GRAD | Capabilities::HESS, "Hessian")?;
            if obj.has(Capabilities::NON_SMOOTH) {
                return Err(Error::InvalidConfig("Newton needs a smooth objective".into()));
            }
        }
        Method::AdaGrad => need(Capabilities::GRAD, "gradient")?,
        Method::IRidge => {
            if config.minibatch != BatchSize::Full {
                return Err(Error::InvalidConfig("iterative ridge runs on the full batch".into()));
            }
        }
        _ => match config.estimator {
            EstimatorChoice::Exact => {
                if obj.exact().is_none() {
                    return Err(Error::CapabilityMissing("exact expectation"));
                }
            }
            EstimatorChoice::Quadrature { .. } => {
                if obj.glm().is_none() {
                    return Err(Error::CapabilityMissing("GLM structure"));
                }
            }
            EstimatorChoice::MonteCarlo => {
                need(Capabilities::GRAD, "gradient")?;
                if matches!(config.method, Method::Van | Method::VanNatural | Method::Vsgd) {
                    need(Capabilities::HESS, "Hessian")?;
                }
            }
        },
    }
    if let BatchSize::Size(m) = config.minibatch {
        let mb = obj.minibatch().ok_or(Error::CapabilityMissing("minibatch"))?;
        if m > mb.num_examples() {
            return Err(Error::InvalidConfig(format!(
                "minibatch size {m} exceeds {} examples",
                mb.num_examples()
            )));
        }
    }
    Ok(())
}

fn hess_mode(method: Method, obj: &dyn Objective) -> HessianMode {
    match method {
        Method::VanD if obj.has(Capabilities::HESS_DIAG) => HessianMode::Diag,
        Method::VanD => HessianMode::DiagReparam,
        Method::Vag => HessianMode::GaussNewton,
        Method::VagD => HessianMode::GaussNewtonDiag,
        _ => HessianMode::Full,
    }
}

fn estimate(
    obj: &dyn Objective,
    q: &GaussianState,
    config: &OptimizerConfig,
    t: usize,
) -> Result<ExpectationEstimate> {
    match config.estimator {
        EstimatorChoice::Exact => estimate_exact(obj, q),
        EstimatorChoice::Quadrature { order } => estimate_quadrature_glm(obj, q, order),
        EstimatorChoice::MonteCarlo => estimate_mc(
            obj,
            q,
            config.mc_samples,
            RngStream::new(config.seed, SAMPLE_STREAM).split(t as u64),
            hess_mode(config.method, obj),
        ),
    }
}

fn full_curvature(est: &ExpectationEstimate) -> Result<DMatrix<f64>> {
    match &est.curvature {
        Curvature::Full(h) => Ok(h.clone()),
        Curvature::Diagonal(h) => Ok(DMatrix::from_diagonal(h)),
        Curvature::Absent => Err(Error::BadParams("estimate carries no curvature".into())),
    }
}

/// One optimizer step. Returns the new state, the gradient norm, the loss
/// estimate and the number of samples, or `None` when the gradient test passes.
fn advance(
    state: &State,
    obj: &dyn Objective,
    config: &OptimizerConfig,
    t: usize,
) -> Result<Option<(State, f64, f64, usize)>> {
    let step = config.schedule.at(t);
    if let State::Point { theta, accum } = state {
        let (next, grad_norm) = match config.method {
            Method::IRidge => {
                let lasso = obj
                    .as_lasso()
                    .ok_or(Error::CapabilityMissing("lasso structure"))?;
                (iridge_step(lasso, theta, config.iridge_floor)?, f64::NAN)
            }
            Method::Newton => {
                let g = obj.gradient(theta)?;
                let norm = g.norm();
                if norm < config.tol_grad {
                    return Ok(None);
                }
                (newton_step(theta, &g, &obj.hessian(theta)?, step)?, norm)
            }
            _ => {
                let g = obj.gradient(theta)?;
                let norm = g.norm();
                if norm < config.tol_grad {
                    return Ok(None);
                }
                let (theta, accum) = adagrad_step(theta, accum, &g, step, config.adagrad_eps)?;
                return Ok(Some((State::Point { theta, accum }, norm, obj.value(state.mean()), 0)));
            }
        };
        let accum = accum.clone();
        return Ok(Some((State::Point { theta: next, accum }, grad_norm, obj.value(theta), 0)));
    }

    let q = state.distribution().expect("distribution state");
    let est = estimate(obj, q, config, t)?;
    let grad_norm = est.avg_grad.norm();
    if !grad_norm.is_finite() {
        return Err(Error::NonFiniteValue("averaged gradient"));
    }
    if grad_norm < config.tol_grad {
        return Ok(None);
    }
    let next = match state {
        State::Full { q, precision } => {
            let h = full_curvature(&est)?;
            let (mean, precision) = van_update(q.mean(), precision, &est.avg_grad, &h, step, config.safeguard)?;
            State::Full {
                q: GaussianState::from_precision(mean, &precision)?,
                precision,
            }
        }
        State::Diag { q, precision } => {
            let h = est
                .curvature
                .diagonal()
                .ok_or_else(|| Error::BadParams("estimate carries no curvature".into()))?;
            let (mean, precision) = van_d_update(q.mean(), precision, &est.avg_grad, &h, step, config.safeguard)?;
            State::Diag {
                q: GaussianState::from_diag_precision(mean, &precision)?,
                precision,
            }
        }
        State::Plain { q } => {
            let half_h = full_curvature(&est)? * 0.5;
            let q = if config.method == Method::Vsgd {
                vsgd_step(q, &est.avg_grad, &half_h, step)?
            } else {
                van_step_natural(q, &est.avg_grad, &half_h, step)?
            };
            State::Plain { q }
        }
        State::Point { .. } => unreachable!(),
    };
    Ok(Some((next, grad_norm, est.value.unwrap_or(f64::NAN), est.samples_used)))
}

/// Run `config.method` on `obj` until a tolerance or the iteration limit is reached.
pub fn run(obj: &dyn Objective, config: &OptimizerConfig) -> Result<RunOutcome> {
    run_with(obj, config, |_| {})
}

/// As [`run`], calling `observer` with each record as it is produced.
pub fn run_with<F>(obj: &dyn Objective, config: &OptimizerConfig, mut observer: F) -> Result<RunOutcome>
where
    F: FnMut(&IterationRecord),
{
    config.validate()?;
    check_compatible(obj, config)?;
    let started = Instant::now();
    let mut state = initial_state(obj, config)?;
    let mut trace = Trace::default();
    let n_examples = obj.minibatch().map(|m| m.num_examples());
    let mut batcher = match (config.minibatch, n_examples) {
        (BatchSize::Size(m), Some(n)) => Some(Batcher::new(n, m, config.seed)),
        _ => None,
    };
    let mut seen = 0usize;
    let mut stop = StopReason::MaxIters;

    for t in 0..config.max_iters {
        let iter = t + 1;
        let mut attempt = || -> Result<Option<(State, f64, f64, usize, usize)>> {
            Ok(match batcher.as_mut() {
                Some(b) => {
                    let idx = b.next();
                    let batch = obj.minibatch().expect("checked").batch(&idx)?;
                    advance(&state, batch.as_ref(), config, t)?.map(|(s, g, l, k)| (s, g, l, k, idx.len()))
                }
                None => advance(&state, obj, config, t)?.map(|(s, g, l, k)| (s, g, l, k, n_examples.unwrap_or(1))),
            })
        };
        let outcome = attempt().map_err(|e| e.at_iteration(iter))?;
        let Some((next, grad_norm, l_estimate, samples, batch_len)) = outcome else {
            stop = StopReason::GradTolerance;
            break;
        };
        seen += batch_len;
        let step_norm = (next.mean() - state.mean()).norm();
        state = next;
        let f_at_mean = obj.value(state.mean());
        let record = IterationRecord {
            iter,
            epoch: match n_examples {
                Some(n) if n > 0 => seen as f64 / n as f64,
                _ => iter as f64,
            },
            f_at_mean,
            l_estimate,
            grad_norm,
            step_norm,
            trace_sigma: state.distribution().map_or(0.0, |q| q.trace_cov()),
            samples_used: samples,
            wallclock_ns: if config.record_wallclock {
                started.elapsed().as_nanos() as u64
            } else {
                0
            },
        };
        observer(&record);
        trace.records.push(record);
        if step_norm < config.tol_step {
            stop = StopReason::StepTolerance;
            break;
        }
    }
    Ok(RunOutcome {
        solution: state.into_solution(),
        trace,
        stop,
    })
}
