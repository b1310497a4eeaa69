//! Variational adaptive-Newton optimizers.
//!
//! The optimizers minimize `E_q[f(θ)]` over Gaussian search distributions
//! `q = N(μ, Σ)`. [`optim::run`] drives any [`optim::Method`] on any
//! [`objectives::Objective`]; the estimators in [`estimator`] supply the
//! averaged gradients and curvature each step needs.
//!
//! ```
//! use nalgebra::{dmatrix, dvector};
//! use van::objectives::make_quadratic;
//! use van::optim::{run, EstimatorChoice, Method, OptimizerConfig};
//!
//! let f = make_quadratic(dmatrix![2.0, 0.0; 0.0, 1.0], dvector![1.0, 2.0]).unwrap();
//! let config = OptimizerConfig::new(Method::Van)
//!     .with_step(1.0)
//!     .with_estimator(EstimatorChoice::Exact)
//!     .with_start(dvector![0.0, 0.0], 1e6);
//! let out = run(&f, &config).unwrap();
//! assert!((out.solution.mean() - dvector![1.0, 2.0]).norm() < 1e-8);
//! ```

pub mod active;
pub mod data;
pub mod error;
pub mod estimator;
pub mod gaussian;
pub mod linalg;
pub mod objectives;
pub mod optim;
pub mod quadrature;
pub mod rng;
pub mod trace;

pub use error::{Error, Result};
pub use gaussian::GaussianState;
