//! Stochastic volatility model:
//!
//! ```text
//! X_{k+1} = alpha X_k + sigma eps_{k+1},    Y_k = beta exp(X_k / 2) eps'_k
//! ```
//!
//! with mutually independent i.i.d. standard normal noise sequences. The
//! measurement density is `N(0, beta^2 exp(x))` evaluated at `y`.
//!
//! Two proposal kernels are provided. `Bootstrap` draws from the transition.
//! `OptimalApprox` is a Gaussian approximation of the optimal kernel (the law
//! of `X_{k+1}` given `X_k` and `Y_{k+1}`), obtained by expanding the
//! log-measurement density around the prior mean `mu = alpha x`: the proposal
//! is `N(m, s^2)` with
//!
//! ```text
//! s^2 = (sigma^-2 + 1/2)^-1
//! m   = s^2 [ mu / sigma^2 + (y^2 exp(-mu) (1 + mu) / beta^2 - 1) / 2 ]
//! ```
//!
//! Only proposal variance is at stake here; the importance weight
//! `W_k = g q / r` corrects any approximation exactly.

use serde::{Deserialize, Serialize};

use super::{log_gaussian, sample_gaussian, LN_2PI};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::ssm::{AdditiveFunctional, Model, StepContext};

/// Floor on `1 - alpha^2` when sampling initial particles from the stationary
/// law, so transient nonstationary parameter values during EM stay usable.
const MIN_ONE_MINUS_ALPHA_SQ: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvParams {
    pub beta: f64,
    pub alpha: f64,
    pub sigma: f64,
}

impl SvParams {
    pub fn new(beta: f64, alpha: f64, sigma: f64) -> Result<Self> {
        if !beta.is_finite() || !alpha.is_finite() || !sigma.is_finite() {
            return Err(Error::InvalidParameter("SV parameters must be finite".into()));
        }
        if beta <= 0.0 || sigma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "SV scales must be positive (beta={beta}, sigma={sigma})"
            )));
        }
        Ok(Self { beta, alpha, sigma })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvProposal {
    Bootstrap,
    #[serde(rename = "optimal", alias = "optimal_approx")]
    OptimalApprox,
}

impl Default for SvProposal {
    fn default() -> Self {
        SvProposal::OptimalApprox
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SvModel {
    params: SvParams,
    proposal: SvProposal,
}

/// Build the SV model with the requested proposal kernel.
pub fn sv_model(params: SvParams, proposal: SvProposal) -> Result<SvModel> {
    SvParams::new(params.beta, params.alpha, params.sigma)?;
    Ok(SvModel { params, proposal })
}

impl SvModel {
    pub fn params(&self) -> &SvParams {
        &self.params
    }

    pub fn proposal(&self) -> SvProposal {
        self.proposal
    }

    fn stationary_sd(&self) -> f64 {
        let denom = (1.0 - self.params.alpha * self.params.alpha).max(MIN_ONE_MINUS_ALPHA_SQ);
        self.params.sigma / denom.sqrt()
    }

    /// Mean and standard deviation of the optimal-kernel approximation.
    fn optimal_proposal(&self, x: f64, y_next: f64) -> (f64, f64) {
        let SvParams { beta, alpha, sigma } = self.params;
        let mu = alpha * x;
        let s2 = 1.0 / (1.0 / (sigma * sigma) + 0.5);
        let data_term = y_next * y_next * (-mu).exp() * (1.0 + mu) / (beta * beta);
        let m = s2 * (mu / (sigma * sigma) + 0.5 * (data_term - 1.0));
        if m.is_finite() {
            (m, s2.sqrt())
        } else {
            // exp(-mu) overflowed; fall back to the prior kernel for this draw.
            (mu, sigma)
        }
    }
}

impl Model for SvModel {
    type State = f64;

    fn state_dim(&self) -> usize {
        1
    }

    fn state_components(&self, x: &f64) -> Vec<f64> {
        vec![*x]
    }

    fn log_transition_density(&self, x: &f64, x_next: &f64) -> f64 {
        log_gaussian(*x_next, self.params.alpha * x, self.params.sigma)
    }

    fn log_measurement_density(&self, x: &f64, y: f64) -> f64 {
        let beta = self.params.beta;
        -0.5 * LN_2PI - beta.ln() - 0.5 * x - 0.5 * y * y * (-x).exp() / (beta * beta)
    }

    fn log_proposal_density(&self, x: &f64, x_next: &f64, y_next: f64) -> f64 {
        match self.proposal {
            SvProposal::Bootstrap => self.log_transition_density(x, x_next),
            SvProposal::OptimalApprox => {
                let (m, s) = self.optimal_proposal(*x, y_next);
                log_gaussian(*x_next, m, s)
            }
        }
    }

    fn sample_proposal(&self, x: &f64, y_next: f64, stream: &mut Stream) -> f64 {
        match self.proposal {
            SvProposal::Bootstrap => self.sample_transition(x, stream),
            SvProposal::OptimalApprox => {
                let (m, s) = self.optimal_proposal(*x, y_next);
                sample_gaussian(m, s, stream)
            }
        }
    }

    fn sample_transition(&self, x: &f64, stream: &mut Stream) -> f64 {
        sample_gaussian(self.params.alpha * x, self.params.sigma, stream)
    }

    fn sample_initial(&self, _y0: f64, stream: &mut Stream) -> f64 {
        sample_gaussian(0.0, self.stationary_sd(), stream)
    }

    fn log_initial_weight(&self, x: &f64, y0: f64) -> f64 {
        // Initial particles come from the stationary state law, a proper
        // stand-in for the improper diffuse prior; weighting by g corrects
        // them to the time-0 posterior.
        self.log_measurement_density(x, y0)
    }

    fn log_weight(&self, x: &f64, x_next: &f64, y_next: f64) -> f64 {
        match self.proposal {
            SvProposal::Bootstrap => self.log_measurement_density(x_next, y_next),
            SvProposal::OptimalApprox => {
                self.log_measurement_density(x_next, y_next) + self.log_transition_density(x, x_next)
                    - self.log_proposal_density(x, x_next, y_next)
            }
        }
    }

    fn sample_generative_initial(&self, stream: &mut Stream) -> Result<f64> {
        let alpha = self.params.alpha;
        if alpha.abs() >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "SV simulation starts from the stationary law and needs |alpha| < 1 (alpha={alpha})"
            )));
        }
        let sd = self.params.sigma / (1.0 - alpha * alpha).sqrt();
        Ok(sample_gaussian(0.0, sd, stream))
    }

    fn sample_observation(&self, x: &f64, stream: &mut Stream) -> f64 {
        sample_gaussian(0.0, self.params.beta * (x / 2.0).exp(), stream)
    }
}

/// The four SV sufficient statistics as per-transition increments:
///
/// ```text
/// S_1 = sum_{k=0}^{n-1} x_k^2          S_2 = sum_{k=1}^{n} x_k^2
/// S_3 = sum_{k=1}^{n} x_k x_{k-1}      S_4 = sum_{k=0}^{n} y_k^2 exp(-x_k)
/// ```
///
/// S_4 squares the observation; the unsquared form would not match the
/// M-step `beta^2 = S_4 / (n+1)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SvStatistics;

pub fn sv_statistics() -> SvStatistics {
    SvStatistics
}

impl AdditiveFunctional<f64> for SvStatistics {
    fn dim(&self) -> usize {
        4
    }

    fn increment(&self, ctx: &StepContext<'_>, x: &f64, x_next: &f64, out: &mut [f64]) {
        let (k, n) = (ctx.k, ctx.n);
        out[0] = x * x;
        out[1] = x_next * x_next;
        out[2] = x * x_next;
        let y = ctx.ys[k];
        out[3] = y * y * (-x).exp();
        if k + 1 == n {
            let yn = ctx.ys[k + 1];
            out[3] += yn * yn * (-x_next).exp();
        }
    }
}
