//! The VAN optimizer family, its baselines and the driver loop.

mod baselines;
mod driver;
mod steps;

pub use baselines::{
    adagrad_step, iridge_solve, iridge_step, least_squares, newton_step, IRidgeSolution, ADAGRAD_EPS,
    IRIDGE_FLOOR, NEWTON_FLOOR,
};
pub use driver::{run, run_with, RunOutcome, Solution, StopReason};
pub use steps::{
    vag_step, van_d_step, van_d_update, van_step, van_step_natural, van_update, vsgd_step, Safeguard,
    MAX_HALVINGS, VSGD_FLOOR,
};

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Van,
    /// VAN computed through natural parameters.
    VanNatural,
    Vag,
    VanD,
    VagD,
    Vsgd,
    Newton,
    AdaGrad,
    IRidge,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Van,
        Method::VanNatural,
        Method::Vag,
        Method::VanD,
        Method::VagD,
        Method::Vsgd,
        Method::Newton,
        Method::AdaGrad,
        Method::IRidge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Van => "van",
            Method::VanNatural => "van-natural",
            Method::Vag => "vag",
            Method::VanD => "van-d",
            Method::VagD => "vag-d",
            Method::Vsgd => "vsgd",
            Method::Newton => "newton",
            Method::AdaGrad => "adagrad",
            Method::IRidge => "iridge",
        }
    }

    pub fn parse(name: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Whether the method keeps a Gaussian search distribution.
    pub fn is_variational(self) -> bool {
        !matches!(self, Method::Newton | Method::AdaGrad | Method::IRidge)
    }

    pub fn is_mean_field(self) -> bool {
        matches!(self, Method::VanD | Method::VagD)
    }

    /// β for the VAN family, ρ for the rest.
    pub fn default_step(self) -> f64 {
        match self {
            Method::Van | Method::VanNatural | Method::Vag | Method::VanD | Method::VagD => 0.1,
            Method::Vsgd | Method::AdaGrad => 0.01,
            Method::Newton | Method::IRidge => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// `β₀ / (1 + t)^power`.
    Decay { beta0: f64, power: f64 },
}

impl Schedule {
    pub const DEFAULT_POWER: f64 = 0.55;

    /// Step size at 0-based iteration `t`.
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            Schedule::Constant(b) => b,
            Schedule::Decay { beta0, power } => beta0 / (1.0 + t as f64).powf(power),
        }
    }

    fn initial(&self) -> f64 {
        match *self {
            Schedule::Constant(b) => b,
            Schedule::Decay { beta0, .. } => beta0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorChoice {
    /// Closed-form expectations from the objective.
    Exact,
    /// Per-example Gauss–Hermite for GLM objectives.
    Quadrature { order: usize },
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchSize {
    Full,
    Size(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    pub schedule: Schedule,
    pub mc_samples: usize,
    pub estimator: EstimatorChoice,
    pub max_iters: usize,
    pub tol_grad: f64,
    pub tol_step: f64,
    pub seed: u64,
    pub minibatch: BatchSize,
    pub safeguard: Safeguard,
    pub adagrad_eps: f64,
    pub iridge_floor: f64,
    /// Fill `wallclock_ns` in trace records; off by default so traces are reproducible.
    pub record_wallclock: bool,
    /// Starting mean; zeros when absent.
    pub mean0: Option<DVector<f64>>,
    /// Starting covariance is `sigma0²·I`.
    pub sigma0: f64,
}

impl OptimizerConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            schedule: Schedule::Constant(method.default_step()),
            mc_samples: 1,
            estimator: if method.is_variational() {
                EstimatorChoice::MonteCarlo
            } else {
                EstimatorChoice::Exact
            },
            max_iters: 10_000,
            tol_grad: 1e-6,
            tol_step: 1e-10,
            seed: 0,
            minibatch: BatchSize::Full,
            safeguard: Safeguard::Backtrack,
            adagrad_eps: ADAGRAD_EPS,
            iridge_floor: IRIDGE_FLOOR,
            record_wallclock: false,
            mean0: None,
            sigma0: 1.0,
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.schedule = Schedule::Constant(step);
        self
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_estimator(mut self, estimator: EstimatorChoice) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.mc_samples = samples;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_minibatch(mut self, minibatch: BatchSize) -> Self {
        self.minibatch = minibatch;
        self
    }

    pub fn with_start(mut self, mean0: DVector<f64>, sigma0: f64) -> Self {
        self.mean0 = Some(mean0);
        self.sigma0 = sigma0;
        self
    }

    pub fn with_tolerances(mut self, tol_grad: f64, tol_step: f64) -> Self {
        self.tol_grad = tol_grad;
        self.tol_step = tol_step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.schedule.initial() > 0.0 && self.schedule.initial().is_finite()) {
            return bad("step size must be positive");
        }
        if let Schedule::Decay { power, .. } = self.schedule {
            if !(power >= 0.0) {
                return bad("decay power must be nonnegative");
            }
        }
        if self.mc_samples == 0 {
            return bad("sample count must be at least 1");
        }
        if !(self.tol_grad > 0.0 && self.tol_step > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return bad("sigma0 must be positive");
        }
        if !(self.adagrad_eps >= 0.0) {
            return bad("AdaGrad epsilon must be nonnegative");
        }
        if !(self.iridge_floor > 0.0) {
            return bad("iterative-ridge floor must be positive");
        }
        if let Safeguard::EigenFloor(eps) = self.safeguard {
            if !(eps > 0.0) {
                return bad("eigenvalue floor must be positive");
            }
        }
        if let EstimatorChoice::Quadrature { order } = self.estimator {
            if order < 3 {
                return bad("quadrature order must be at least 3");
            }
        }
        if self.minibatch == BatchSize::Size(0) {
            return bad("minibatch size must be at least 1");
        }
        if matches!(self.method, Method::Vag | Method::VagD) && self.estimator != EstimatorChoice::MonteCarlo {
            return bad("Gauss-Newton methods need Monte-Carlo gradients");
        }
        Ok(())
    }
}
