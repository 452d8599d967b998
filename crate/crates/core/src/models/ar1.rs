//! Noisily observed AR(1) model:
//!
//! ```text
//! X_{k+1} = a X_k + sigma_w W_{k+1},    Y_k = X_k + sigma_v V_k
//! ```
//!
//! The filter is initialized from the exact time-0 posterior under a diffuse
//! prior, `N(y_0, sigma_v^2)`, with unit initial weights. The proposal is the
//! transition kernel (bootstrap), so the one-step weight is the measurement
//! density evaluated at the new state.

use serde::{Deserialize, Serialize};

use super::{log_gaussian, sample_gaussian};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::ssm::{AdditiveFunctional, Model, StepContext};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ar1Params {
    pub a: f64,
    pub sigma_w: f64,
    pub sigma_v: f64,
}

impl Ar1Params {
    /// Validated constructor; rejects nonpositive noise scales.
    ///
    /// Fields are public, so degenerate (zero-noise) limits can still be
    /// built literally where a test or diagnostic needs them.
    pub fn new(a: f64, sigma_w: f64, sigma_v: f64) -> Result<Self> {
        if !a.is_finite() || !sigma_w.is_finite() || !sigma_v.is_finite() {
            return Err(Error::InvalidParameter("AR(1) parameters must be finite".into()));
        }
        if sigma_w <= 0.0 || sigma_v <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "AR(1) noise scales must be positive (sigma_w={sigma_w}, sigma_v={sigma_v})"
            )));
        }
        Ok(Self { a, sigma_w, sigma_v })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Ar1Model {
    params: Ar1Params,
}

/// Build the bootstrap-configured AR(1) model.
pub fn ar1_model(params: Ar1Params) -> Result<Ar1Model> {
    Ar1Params::new(params.a, params.sigma_w, params.sigma_v)?;
    Ok(Ar1Model { params })
}

impl Ar1Model {
    pub fn params(&self) -> &Ar1Params {
        &self.params
    }

    /// Unvalidated constructor, for degenerate (zero-noise) limits.
    pub fn new_unchecked(params: Ar1Params) -> Self {
        Self { params }
    }
}

impl Model for Ar1Model {
    type State = f64;

    fn state_dim(&self) -> usize {
        1
    }

    fn state_components(&self, x: &f64) -> Vec<f64> {
        vec![*x]
    }

    fn log_transition_density(&self, x: &f64, x_next: &f64) -> f64 {
        log_gaussian(*x_next, self.params.a * x, self.params.sigma_w)
    }

    fn log_measurement_density(&self, x: &f64, y: f64) -> f64 {
        log_gaussian(y, *x, self.params.sigma_v)
    }

    fn log_proposal_density(&self, x: &f64, x_next: &f64, _y_next: f64) -> f64 {
        self.log_transition_density(x, x_next)
    }

    fn sample_proposal(&self, x: &f64, _y_next: f64, stream: &mut Stream) -> f64 {
        self.sample_transition(x, stream)
    }

    fn sample_transition(&self, x: &f64, stream: &mut Stream) -> f64 {
        sample_gaussian(self.params.a * x, self.params.sigma_w, stream)
    }

    fn sample_initial(&self, y0: f64, stream: &mut Stream) -> f64 {
        sample_gaussian(y0, self.params.sigma_v, stream)
    }

    fn log_initial_weight(&self, _x: &f64, _y0: f64) -> f64 {
        // Particles are drawn from the exact diffuse-prior posterior, so the
        // initial weights are constant.
        0.0
    }

    fn log_weight(&self, _x: &f64, x_next: &f64, y_next: f64) -> f64 {
        // Bootstrap identity: W_k(x, x') = g(x', y_k).
        self.log_measurement_density(x_next, y_next)
    }

    fn sample_generative_initial(&self, stream: &mut Stream) -> Result<f64> {
        let a = self.params.a;
        if a.abs() >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "AR(1) simulation starts from the stationary law and needs |a| < 1 (a={a})"
            )));
        }
        let sd = self.params.sigma_w / (1.0 - a * a).sqrt();
        Ok(sample_gaussian(0.0, sd, stream))
    }

    fn sample_observation(&self, x: &f64, stream: &mut Stream) -> f64 {
        sample_gaussian(*x, self.params.sigma_v, stream)
    }
}

/// The four AR(1) sufficient statistics as per-transition increments:
///
/// ```text
/// S_1 = sum_{k=1}^{n-1} x_k^2        S_2 = sum_{k=0}^{n-1} x_k x_{k+1}
/// S_3 = sum_{k=0}^{n}   x_k^2        S_4 = sum_{k=0}^{n}   (y_k - x_k)^2
/// ```
///
/// Increment `k` carries `x_{k+1}^2` for S_1 (empty at `k = n-1`), `x_k^2`
/// for S_3 and `(y_k - x_k)^2` for S_4; the trailing `k = n` terms of S_3 and
/// S_4 are folded into the last increment so the sums over `k = 0..n-1`
/// reproduce the whole-path statistics exactly.
#[derive(Clone, Copy, Debug, Default)]
pub struct Ar1Statistics;

pub fn ar1_statistics() -> Ar1Statistics {
    Ar1Statistics
}

impl AdditiveFunctional<f64> for Ar1Statistics {
    fn dim(&self) -> usize {
        4
    }

    fn increment(&self, ctx: &StepContext<'_>, x: &f64, x_next: &f64, out: &mut [f64]) {
        let (k, n) = (ctx.k, ctx.n);
        let last = k + 1 == n;
        out[0] = if last { 0.0 } else { x_next * x_next };
        out[1] = x * x_next;
        out[2] = x * x;
        let r = ctx.ys[k] - x;
        out[3] = r * r;
        if last {
            out[2] += x_next * x_next;
            let rn = ctx.ys[k + 1] - x_next;
            out[3] += rn * rn;
        }
    }
}
