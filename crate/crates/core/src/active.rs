//! Pool-based active learning for binary logistic regression, ranking pool
//! points by the entropy of their predictive distribution under `q`.

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{estimate_mc, estimate_quadrature_glm, HessianMode};
use crate::gaussian::GaussianState;
use crate::objectives::{make_logistic, sigmoid, test_log_loss, Minibatch};
use crate::optim::{van_update, EstimatorChoice, Safeguard};
use crate::rng::RngStream;

pub const DEFAULT_PREDICTIVE_SAMPLES: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionResult {
    /// Entropy of each pool point, in nats.
    pub scores: DVector<f64>,
    /// Highest scores first.
    pub selected_indices: Vec<usize>,
    /// Estimated `p(y = +1 | x)` for each pool point.
    pub predictive_probs: DVector<f64>,
}

/// `(1/S)·Σₛ sigmoid(xᵀθ⁽ˢ⁾)` with `θ⁽ˢ⁾ ~ q`.
pub fn predictive_prob(x: &DVector<f64>, q: &GaussianState, samples: usize, stream: RngStream) -> Result<f64> {
    let probs = predictive_probs(&DMatrix::from_row_slice(1, x.len(), x.as_slice()), q, samples, stream)?;
    Ok(probs[0])
}

/// Predictive probabilities for every row of `features`, all computed from
/// one shared batch of draws.
pub fn predictive_probs(
    features: &DMatrix<f64>,
    q: &GaussianState,
    samples: usize,
    stream: RngStream,
) -> Result<DVector<f64>> {
    if samples == 0 {
        return Err(Error::BadParams("sample count must be at least 1".into()));
    }
    if features.ncols() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            found: features.ncols(),
        });
    }
    let draws = q.sample(stream, samples)?;
    // rows: pool points, columns: draws
    let margins = features * draws.theta.transpose();
    let probs: Vec<f64> = (0..features.nrows())
        .into_par_iter()
        .map(|i| margins.row(i).iter().map(|z| sigmoid(*z)).sum::<f64>() / samples as f64)
        .collect();
    Ok(DVector::from_vec(probs))
}

/// Binary entropy in nats, with `0·log 0 = 0`.
pub fn entropy_score(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(p));
    }
    let a = p.min(1.0 - p);
    let b = 1.0 - a;
    let term = |v: f64| if v > 0.0 { -v * v.ln() } else { 0.0 };
    Ok(term(a) + term(b))
}

/// Indices of the `m` largest scores; ties go to the smaller index.
pub fn top_indices(scores: &[f64], m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(m);
    idx
}

/// Score every pool point and pick the `m` most uncertain.
pub fn select_batch(
    pool: &Dataset,
    q: &GaussianState,
    m: usize,
    samples: usize,
    stream: RngStream,
) -> Result<AcquisitionResult> {
    if m > pool.len() {
        return Err(Error::PoolTooSmall {
            requested: m,
            available: pool.len(),
        });
    }
    let predictive = predictive_probs(pool.features(), q, samples, stream)?;
    let scores = predictive
        .iter()
        .map(|p| entropy_score(p.clamp(0.0, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AcquisitionResult {
        selected_indices: top_indices(&scores, m),
        scores: DVector::from_vec(scores),
        predictive_probs: predictive,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Acquisition {
    Entropy,
    Uniform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActiveConfig {
    pub reg_strength: f64,
    pub beta: f64,
    pub estimator: EstimatorChoice,
    /// Draws per step when `estimator` is Monte Carlo.
    pub mc_samples: usize,
    pub batch_size: usize,
    pub rounds: usize,
    pub steps_per_round: usize,
    pub predictive_samples: usize,
    /// Keep selected points in the pool.
    pub replace: bool,
    pub acquisition: Acquisition,
    pub seed: u64,
    pub sigma0: f64,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        Self {
            reg_strength: 1.0,
            beta: 0.1,
            estimator: EstimatorChoice::Quadrature { order: 20 },
            mc_samples: 10,
            batch_size: 10,
            rounds: 10,
            steps_per_round: 1,
            predictive_samples: DEFAULT_PREDICTIVE_SAMPLES,
            replace: false,
            acquisition: Acquisition::Entropy,
            seed: 0,
            sigma0: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActiveRecord {
    pub round: usize,
    pub examples_seen: usize,
    pub test_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActiveOutcome {
    pub q: GaussianState,
    pub curve: Vec<ActiveRecord>,
}

impl ActiveOutcome {
    /// First point on the learning curve at or below `loss`.
    pub fn examples_to_reach(&self, loss: f64) -> Option<usize> {
        self.curve
            .iter()
            .find(|r| r.test_loss <= loss)
            .map(|r| r.examples_seen)
    }
}

const ACQUIRE_STREAM: u64 = 0xac_0001;
const STEP_STREAM: u64 = 0xac_0002;

/// Alternate acquisition and VAN steps on the acquired minibatch, recording
/// the test log-loss of the mean after each round.
pub fn active_loop(pool: &Dataset, test: &Dataset, config: &ActiveConfig) -> Result<ActiveOutcome> {
    let n = pool.len();
    let m = config.batch_size;
    if m == 0 {
        return Err(Error::InvalidConfig("batch size must be at least 1".into()));
    }
    if !(config.beta > 0.0) || !(config.sigma0 > 0.0) {
        return Err(Error::InvalidConfig("beta and sigma0 must be positive".into()));
    }
    let needed = if config.replace { m } else { m * config.rounds };
    if needed > n {
        return Err(Error::PoolTooSmall {
            requested: needed,
            available: n,
        });
    }
    let objective = make_logistic(pool, config.reg_strength)?;
    let d = pool.dim();
    let var = config.sigma0 * config.sigma0;
    let mut precision = DMatrix::identity(d, d) * (1.0 / var);
    let mut q = GaussianState::full(DVector::zeros(d), DMatrix::identity(d, d) * var)?;
    let mut available: Vec<usize> = (0..n).collect();
    let mut curve = vec![ActiveRecord {
        round: 0,
        examples_seen: 0,
        test_loss: test_log_loss(q.mean(), test)?,
    }];

    for round in 1..=config.rounds {
        let mut chosen: Vec<usize> = match config.acquisition {
            Acquisition::Entropy => {
                let candidates = pool.subset(&available)?;
                let stream = RngStream::new(config.seed, ACQUIRE_STREAM).split(round as u64);
                let picked = select_batch(&candidates, &q, m, config.predictive_samples, stream)?;
                picked.selected_indices.iter().map(|&i| available[i]).collect()
            }
            Acquisition::Uniform => {
                let mut rng = RngStream::new(config.seed, ACQUIRE_STREAM).split(round as u64).rng(0);
                available.choose_multiple(&mut rng, m).copied().collect()
            }
        };
        chosen.sort_unstable();
        let batch = objective.batch(&chosen)?;
        for step in 0..config.steps_per_round {
            let t = ((round - 1) * config.steps_per_round + step) as u64;
            let est = match config.estimator {
                EstimatorChoice::Quadrature { order } => estimate_quadrature_glm(batch.as_ref(), &q, order)?,
                EstimatorChoice::MonteCarlo => estimate_mc(
                    batch.as_ref(),
                    &q,
                    config.mc_samples,
                    RngStream::new(config.seed, STEP_STREAM).split(t),
                    HessianMode::Full,
                )?,
                EstimatorChoice::Exact => return Err(Error::CapabilityMissing("exact expectation")),
            };
            let h = est.curvature.full().expect("full curvature").clone();
            let (mean, p) = van_update(q.mean(), &precision, &est.avg_grad, &h, config.beta, Safeguard::Backtrack)?;
            q = GaussianState::from_precision(mean, &p)?;
            precision = p;
        }
        if !config.replace {
            available.retain(|i| chosen.binary_search(i).is_err());
        }
        curve.push(ActiveRecord {
            round,
            examples_seen: round * m,
            test_loss: test_log_loss(q.mean(), test)?,
        });
    }
    Ok(ActiveOutcome { q, curve })
}
