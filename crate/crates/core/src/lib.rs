//! Fixed-lag sequential Monte Carlo smoothing of additive functionals.
//!
//! Particle filters estimate smoothed path functionals poorly at face value:
//! repeated resampling collapses the particle genealogy, so trajectory-based
//! estimators degenerate as the horizon grows. For additive functionals
//! `t_n = sum_k s_k(x_k, x_{k+1})`, forgetting of the conditional hidden
//! chain means term `k` barely depends on observations past `k + lag`, so
//! each term can be frozen once the filter has moved a fixed lag beyond it.
//! This crate implements both estimator families over a deterministic,
//! stream-addressed particle engine, together with:
//!
//! - the noisily observed AR(1) and stochastic volatility models with their
//!   sufficient statistics ([`models`]);
//! - an exact Kalman/RTS smoother for the AR(1) model, the ground truth the
//!   benchmarks compare against ([`kalman`]);
//! - exponential-family EM with closed-form M-steps and a growing-particle
//!   SMCEM driver ([`em`]).

pub mod cloud;
pub mod config;
pub mod em;
pub mod engine;
pub mod error;
pub mod kalman;
pub mod models;
pub mod rng;
pub mod smoother;
pub mod ssm;

pub use cloud::ParticleCloud;
pub use error::{Error, Result};
pub use rng::{derive_seed, RngContract, Stream, StreamTag};
pub use smoother::{smooth, EstimatorKind, SmoothedEstimate, SmootherConfig};
pub use ssm::{resolve_lag, AdditiveFunctional, LagPolicy, Model, StepContext, SufficientStatistics};
