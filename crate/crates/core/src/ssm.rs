//! State space model interface and the shared domain types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Smoothed additive statistics, one entry per statistic component.
pub type SufficientStatistics = Vec<f64>;

/// Per-step context handed to additive-functional increments.
///
/// `k` is the transition index (state pair `x_k`, `x_{k+1}`), `n` the horizon
/// and `ys` the full observation record `y_{0:n}`, which increments may read.
#[derive(Clone, Copy, Debug)]
pub struct StepContext<'a> {
    pub k: usize,
    pub n: usize,
    pub ys: &'a [f64],
}

/// An additive path functional `t_n(x_{0:n}) = sum_k s_k(x_k, x_{k+1})`.
pub trait AdditiveFunctional<S>: Sync {
    /// Dimension of the statistic vector.
    fn dim(&self) -> usize;

    /// Write `s_k(x_k, x_{k+1})` into `out` (length `dim()`).
    fn increment(&self, ctx: &StepContext<'_>, x: &S, x_next: &S, out: &mut [f64]);
}

/// Additive functional defined by a closure; handy for tests and diagnostics.
pub struct FnFunctional<F> {
    dim: usize,
    f: F,
}

impl<F> FnFunctional<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<S, F> AdditiveFunctional<S> for FnFunctional<F>
where
    F: Fn(&StepContext<'_>, &S, &S, &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn increment(&self, ctx: &StepContext<'_>, x: &S, x_next: &S, out: &mut [f64]) {
        (self.f)(ctx, x, x_next, out)
    }
}

/// A theta-parameterized state space model, in the form the particle engine
/// consumes: transition kernel `q`, measurement density `g`, an initial
/// sampler with matching weight `W_0`, and a proposal kernel `R_k` with its
/// importance weight `W_k`.
///
/// All densities are exposed in log scale; natural-scale convenience wrappers
/// are provided. Internal weight arithmetic is done entirely in log scale.
///
/// States are fixed-dimension real vectors; both built-in models are scalar,
/// so they use `State = f64` and report `state_dim() == 1`.
pub trait Model: Sync {
    type State: Copy + PartialEq + Send + Sync + std::fmt::Debug + 'static;

    fn state_dim(&self) -> usize;

    /// Flatten a state into its real components, for serialization.
    fn state_components(&self, x: &Self::State) -> Vec<f64>;

    /// `log q(x, x')`.
    fn log_transition_density(&self, x: &Self::State, x_next: &Self::State) -> f64;

    /// `log g(x, y)`.
    fn log_measurement_density(&self, x: &Self::State, y: f64) -> f64;

    /// `log r_k(x, x')` for the proposal kernel used at a step observing `y_next`.
    fn log_proposal_density(&self, x: &Self::State, x_next: &Self::State, y_next: f64) -> f64;

    /// Draw from the proposal kernel `R_k(x, .)` for a step observing `y_next`.
    fn sample_proposal(&self, x: &Self::State, y_next: f64, stream: &mut Stream) -> Self::State;

    /// Draw from the transition kernel `Q(x, .)`.
    fn sample_transition(&self, x: &Self::State, stream: &mut Stream) -> Self::State;

    /// Draw an initial particle from the filter's initial sampler.
    fn sample_initial(&self, y0: f64, stream: &mut Stream) -> Self::State;

    /// `log W_0(x)`, the initial importance weight.
    fn log_initial_weight(&self, x: &Self::State, y0: f64) -> f64;

    /// `log W_k(x, x')`, the one-step importance weight
    /// `g(x', y_k) q(x, x') / r_k(x, x')`.
    ///
    /// In the bootstrap configuration this must equal
    /// `log_measurement_density(x', y_k)` exactly.
    fn log_weight(&self, x: &Self::State, x_next: &Self::State, y_next: f64) -> f64;

    /// Draw the time-0 state of the generative model, for dataset simulation.
    fn sample_generative_initial(&self, stream: &mut Stream) -> Result<Self::State>;

    /// Draw an observation given the state, for dataset simulation.
    fn sample_observation(&self, x: &Self::State, stream: &mut Stream) -> f64;

    fn transition_density(&self, x: &Self::State, x_next: &Self::State) -> f64 {
        self.log_transition_density(x, x_next).exp()
    }

    fn measurement_density(&self, x: &Self::State, y: f64) -> f64 {
        self.log_measurement_density(x, y).exp()
    }
}

/// How the smoothing lag is chosen from the horizon `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagPolicy {
    /// A constant lag.
    Fixed(usize),
    /// `ceil(c * ln n)`, the growth rate under which the truncation bias
    /// vanishes relative to the Monte Carlo error.
    Logarithmic(f64),
}

/// Resolve the lag for horizon `n`, clamped to `[1, n]`.
///
/// The lower clamp is structural: term `k` needs both `x_k` and `x_{k+1}`,
/// so a window always spans at least one transition.
pub fn resolve_lag(policy: LagPolicy, n: usize) -> Result<usize> {
    if n < 1 {
        return Err(Error::InvalidParameter("lag resolution requires n >= 1".into()));
    }
    let raw = match policy {
        LagPolicy::Fixed(delta) => delta,
        LagPolicy::Logarithmic(c) => {
            if !c.is_finite() {
                return Err(Error::InvalidParameter("logarithmic lag constant must be finite".into()));
            }
            let v = (c * (n as f64).ln()).ceil();
            if v <= 0.0 {
                1
            } else {
                v as usize
            }
        }
    };
    Ok(raw.clamp(1, n))
}
