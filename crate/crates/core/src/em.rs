//! Exponential-family EM: closed-form M-steps for the two models, the exact
//! (Kalman) EM reference for AR(1), and the SMCEM driver whose E-step is
//! particle smoothing with a growing particle schedule.
//!
//! For both families the intermediate quantity has the form
//! `Q(theta; theta') = <psi(theta), S_hat> - c(theta)` with `S_hat` the
//! smoothed sufficient statistics under `theta'`; each `mstep` below is the
//! exact maximizer of that objective.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::kalman::{exact_statistics, kalman_posterior};
use crate::models::{
    ar1_model, ar1_statistics, sv_model, sv_statistics, Ar1Model, Ar1Params, Ar1Statistics, SvModel,
    SvParams, SvProposal, SvStatistics,
};
use crate::rng::RngContract;
use crate::smoother::{smooth_with, EstimatorKind, SmootherConfig};
use crate::ssm::{AdditiveFunctional, LagPolicy, Model, SufficientStatistics};
use crate::engine::{ResampleSchedule, Resampler};

/// Variance floor for M-step outputs, with a flag recorded in the trace.
const MSTEP_VAR_FLOOR: f64 = 1e-12;

/// M-step output plus a flag set when a variance had to be floored.
#[derive(Clone, Copy, Debug)]
pub struct MStepOutput<P> {
    pub params: P,
    pub variance_floored: bool,
}

/// AR(1) parameter update from smoothed statistics:
/// `a = S2/S1`, `sigma_w^2 = (S3 - a S2)/n`, `sigma_v^2 = S4/(n+1)`.
pub fn ar1_mstep(stats: &[f64], n: usize) -> Result<MStepOutput<Ar1Params>> {
    if stats.len() != 4 {
        return Err(Error::DegenerateStatistics(format!("expected 4 components, got {}", stats.len())));
    }
    if n < 1 {
        return Err(Error::InvalidParameter("M-step requires n >= 1".into()));
    }
    if !(stats[0] > 0.0) {
        return Err(Error::DegenerateStatistics(format!("S1 must be positive, got {}", stats[0])));
    }
    let a = stats[1] / stats[0];
    let mut floored = false;
    let mut var_w = (stats[2] - a * stats[1]) / n as f64;
    let mut var_v = stats[3] / (n as f64 + 1.0);
    if var_w < MSTEP_VAR_FLOOR {
        var_w = MSTEP_VAR_FLOOR;
        floored = true;
    }
    if var_v < MSTEP_VAR_FLOOR {
        var_v = MSTEP_VAR_FLOOR;
        floored = true;
    }
    Ok(MStepOutput {
        params: Ar1Params { a, sigma_w: var_w.sqrt(), sigma_v: var_v.sqrt() },
        variance_floored: floored,
    })
}

/// SV parameter update from smoothed statistics:
/// `alpha = S3/S1`, `sigma^2 = (S2 - alpha S3)/n`, `beta^2 = S4/(n+1)`.
pub fn sv_mstep(stats: &[f64], n: usize) -> Result<MStepOutput<SvParams>> {
    if stats.len() != 4 {
        return Err(Error::DegenerateStatistics(format!("expected 4 components, got {}", stats.len())));
    }
    if n < 1 {
        return Err(Error::InvalidParameter("M-step requires n >= 1".into()));
    }
    if !(stats[0] > 0.0) {
        return Err(Error::DegenerateStatistics(format!("S1 must be positive, got {}", stats[0])));
    }
    let alpha = stats[2] / stats[0];
    let mut floored = false;
    let mut var_s = (stats[1] - alpha * stats[2]) / n as f64;
    let mut var_b = stats[3] / (n as f64 + 1.0);
    if var_s < MSTEP_VAR_FLOOR {
        var_s = MSTEP_VAR_FLOOR;
        floored = true;
    }
    if var_b < MSTEP_VAR_FLOOR {
        var_b = MSTEP_VAR_FLOOR;
        floored = true;
    }
    Ok(MStepOutput {
        params: SvParams { beta: var_b.sqrt(), alpha, sigma: var_s.sqrt() },
        variance_floored: floored,
    })
}

/// A model family with exponential-family complete-data likelihood: natural
/// parameters, parameter-dependent log-partition term, statistic functional
/// and closed-form M-step.
pub trait ExponentialFamily: Sync {
    type Params: Copy + std::fmt::Debug + PartialEq + Send + Sync;
    type Model: Model;
    type Functional: AdditiveFunctional<<Self::Model as Model>::State>;

    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn param_names(&self) -> &'static [&'static str];
    fn params_to_vec(&self, p: &Self::Params) -> Vec<f64>;
    fn build_model(&self, p: &Self::Params) -> Result<Self::Model>;
    fn functional(&self) -> Self::Functional;

    /// `psi(theta)`.
    fn natural_params(&self, p: &Self::Params) -> Vec<f64>;

    /// `c(theta)`, dropping terms that do not depend on the parameters.
    fn log_partition(&self, p: &Self::Params, n: usize) -> f64;

    fn mstep(&self, stats: &[f64], n: usize) -> Result<MStepOutput<Self::Params>>;

    /// Exact smoothed statistics, where an exact smoother exists.
    fn exact_statistics(&self, _p: &Self::Params, _ys: &[f64]) -> Option<Result<SufficientStatistics>> {
        None
    }

    /// Exact log-likelihood, where available.
    fn exact_log_likelihood(&self, _p: &Self::Params, _ys: &[f64]) -> Option<Result<f64>> {
        None
    }
}

/// `<psi(theta), S_hat> - c(theta)`.
pub fn q_objective<Fam: ExponentialFamily>(family: &Fam, p: &Fam::Params, stats: &[f64], n: usize) -> f64 {
    family
        .natural_params(p)
        .iter()
        .zip(stats)
        .map(|(psi, s)| psi * s)
        .sum::<f64>()
        - family.log_partition(p, n)
}

/// Noisily observed AR(1) family.
#[derive(Clone, Copy, Debug, Default)]
pub struct Ar1Family;

impl ExponentialFamily for Ar1Family {
    type Params = Ar1Params;
    type Model = Ar1Model;
    type Functional = Ar1Statistics;

    fn name(&self) -> &'static str {
        "ar1"
    }

    fn dim(&self) -> usize {
        4
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["a", "sigma_w", "sigma_v"]
    }

    fn params_to_vec(&self, p: &Ar1Params) -> Vec<f64> {
        vec![p.a, p.sigma_w, p.sigma_v]
    }

    fn build_model(&self, p: &Ar1Params) -> Result<Ar1Model> {
        ar1_model(*p)
    }

    fn functional(&self) -> Ar1Statistics {
        ar1_statistics()
    }

    fn natural_params(&self, p: &Ar1Params) -> Vec<f64> {
        let qw = p.sigma_w * p.sigma_w;
        let rv = p.sigma_v * p.sigma_v;
        vec![-p.a * p.a / (2.0 * qw), p.a / qw, -1.0 / (2.0 * qw), -1.0 / (2.0 * rv)]
    }

    fn log_partition(&self, p: &Ar1Params, n: usize) -> f64 {
        let qw = p.sigma_w * p.sigma_w;
        let rv = p.sigma_v * p.sigma_v;
        n as f64 * qw.ln() / 2.0 + (n as f64 + 1.0) * rv.ln() / 2.0
    }

    fn mstep(&self, stats: &[f64], n: usize) -> Result<MStepOutput<Ar1Params>> {
        ar1_mstep(stats, n)
    }

    fn exact_statistics(&self, p: &Ar1Params, ys: &[f64]) -> Option<Result<SufficientStatistics>> {
        Some(kalman_posterior(p, ys).and_then(|post| exact_statistics(&post, ys)))
    }

    fn exact_log_likelihood(&self, p: &Ar1Params, ys: &[f64]) -> Option<Result<f64>> {
        Some(crate::kalman::kalman_filter(p, ys).map(|post| post.log_likelihood()))
    }
}

/// Stochastic volatility family.
#[derive(Clone, Copy, Debug)]
pub struct SvFamily {
    pub proposal: SvProposal,
}

impl Default for SvFamily {
    fn default() -> Self {
        Self { proposal: SvProposal::OptimalApprox }
    }
}

impl ExponentialFamily for SvFamily {
    type Params = SvParams;
    type Model = SvModel;
    type Functional = SvStatistics;

    fn name(&self) -> &'static str {
        "sv"
    }

    fn dim(&self) -> usize {
        4
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["beta", "alpha", "sigma"]
    }

    fn params_to_vec(&self, p: &SvParams) -> Vec<f64> {
        vec![p.beta, p.alpha, p.sigma]
    }

    fn build_model(&self, p: &SvParams) -> Result<SvModel> {
        sv_model(*p, self.proposal)
    }

    fn functional(&self) -> SvStatistics {
        sv_statistics()
    }

    fn natural_params(&self, p: &SvParams) -> Vec<f64> {
        let s2 = p.sigma * p.sigma;
        let b2 = p.beta * p.beta;
        vec![-p.alpha * p.alpha / (2.0 * s2), -1.0 / (2.0 * s2), p.alpha / s2, -1.0 / (2.0 * b2)]
    }

    fn log_partition(&self, p: &SvParams, n: usize) -> f64 {
        let s2 = p.sigma * p.sigma;
        let b2 = p.beta * p.beta;
        n as f64 * s2.ln() / 2.0 + (n as f64 + 1.0) * b2.ln() / 2.0
    }

    fn mstep(&self, stats: &[f64], n: usize) -> Result<MStepOutput<SvParams>> {
        sv_mstep(stats, n)
    }
}

/// Particle-count schedule over MCEM iterations: constant during the warm
/// phase, then growing quadratically to the final count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McemSchedule {
    pub warm_iters: usize,
    pub warm_n: usize,
    pub total_iters: usize,
    pub final_n: usize,
}

/// Build the growing schedule: `N_i = warm_n` for `i <= warm_iters`, then
/// `warm_n + ceil(g (i - warm_iters)^2)` with the rate `g` pinned by the
/// final iteration hitting exactly `final_n`.
pub fn mcem_schedule(
    warm_iters: usize,
    warm_n: usize,
    total_iters: usize,
    final_n: usize,
) -> Result<McemSchedule> {
    if total_iters <= warm_iters {
        return Err(Error::InvalidParameter("total iterations must exceed warm iterations".into()));
    }
    if warm_n < 1 || final_n < warm_n {
        return Err(Error::InvalidParameter(
            "particle counts must satisfy 1 <= warm_n <= final_n".into(),
        ));
    }
    Ok(McemSchedule { warm_iters, warm_n, total_iters, final_n })
}

impl McemSchedule {
    /// Constant-`N` schedule (used by the exact-E-step reference runs).
    pub fn constant(iters: usize, n: usize) -> Self {
        Self { warm_iters: iters, warm_n: n, total_iters: iters, final_n: n }
    }

    /// Particle count for 1-based iteration `i`.
    pub fn particles_at(&self, i: usize) -> usize {
        debug_assert!(i >= 1 && i <= self.total_iters);
        if i <= self.warm_iters {
            return self.warm_n;
        }
        let j = (i - self.warm_iters) as f64;
        let span = (self.total_iters - self.warm_iters) as f64;
        let g = (self.final_n - self.warm_n) as f64 / (span * span);
        let n = self.warm_n + (g * j * j).ceil() as usize;
        n.min(self.final_n)
    }

    /// Total simulated particles across all iterations.
    pub fn cumulative(&self) -> usize {
        (1..=self.total_iters).map(|i| self.particles_at(i)).sum()
    }
}

/// One EM iteration record.
#[derive(Clone, Debug)]
pub struct McemIteration {
    pub iteration: usize,
    /// Particle count of the E-step; `None` for exact E-steps.
    pub n_particles: Option<usize>,
    /// Parameters after this iteration's M-step.
    pub params: Vec<f64>,
    /// Smoothed statistics used by the M-step.
    pub stats: Vec<f64>,
    /// Exact log-likelihood at the updated parameters, when computable.
    pub log_likelihood: Option<f64>,
    pub variance_floored: bool,
    pub wall_time_s: f64,
}

/// Full EM run record.
#[derive(Clone, Debug)]
pub struct McemTrace {
    pub family: String,
    pub param_names: Vec<String>,
    pub iterations: Vec<McemIteration>,
}

impl McemTrace {
    pub fn final_params(&self) -> Option<&[f64]> {
        self.iterations.last().map(|it| it.params.as_slice())
    }
}

/// E-step strategy for [`smcem`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EStep {
    /// Particle smoothing with the given estimator.
    Particle {
        kind: EstimatorKind,
        lag: LagPolicy,
        resampler: Resampler,
        schedule: ResampleSchedule,
    },
    /// Exact smoothed statistics (oracle mode; AR(1) only).
    Exact,
}

/// Run (SMC)EM: at iteration `i`, estimate the smoothed statistics under the
/// current parameters with `N_i` particles (or exactly, in oracle mode),
/// apply the closed-form M-step and record the trace. Observations stay
/// fixed across iterations; particle randomness is fresh each iteration,
/// keyed by the iteration index. Deterministic given `seed`.
pub fn smcem<Fam: ExponentialFamily>(
    family: &Fam,
    ys: &[f64],
    theta0: &Fam::Params,
    schedule: &McemSchedule,
    estep: &EStep,
    seed: u64,
) -> Result<McemTrace> {
    if ys.len() < 2 {
        return Err(Error::InvalidParameter("EM requires a horizon of at least 1".into()));
    }
    let n = ys.len() - 1;
    let contract = RngContract::new(seed);
    let mut theta = *theta0;
    let mut trace = McemTrace {
        family: family.name().to_string(),
        param_names: family.param_names().iter().map(|s| s.to_string()).collect(),
        iterations: Vec::with_capacity(schedule.total_iters),
    };
    for i in 1..=schedule.total_iters {
        let wrap = |e: Error| Error::EmIteration { iteration: i, source: Box::new(e) };
        let started = Instant::now();
        let (stats, n_particles) = match estep {
            EStep::Exact => {
                let stats = family
                    .exact_statistics(&theta, ys)
                    .ok_or_else(|| {
                        wrap(Error::InvalidConfig(format!(
                            "family {} has no exact E-step",
                            family.name()
                        )))
                    })?
                    .map_err(wrap)?;
                (stats, None)
            }
            EStep::Particle { kind, lag, resampler, schedule: resample_schedule } => {
                let n_i = schedule.particles_at(i);
                let model = family.build_model(&theta).map_err(wrap)?;
                let config = SmootherConfig {
                    n_particles: n_i,
                    kind: *kind,
                    lag: *lag,
                    resampler: *resampler,
                    schedule: *resample_schedule,
                };
                let est = smooth_with(&model, ys, &family.functional(), &config, contract.child(i as u64))
                    .map_err(wrap)?;
                (est.value, Some(n_i))
            }
        };
        let out = family.mstep(&stats, n).map_err(wrap)?;
        theta = out.params;
        let log_likelihood = match family.exact_log_likelihood(&theta, ys) {
            Some(r) => Some(r.map_err(wrap)?),
            None => None,
        };
        trace.iterations.push(McemIteration {
            iteration: i,
            n_particles,
            params: family.params_to_vec(&theta),
            stats,
            log_likelihood,
            variance_floored: out.variance_floored,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
    }
    Ok(trace)
}

/// Exact EM for AR(1): Kalman-smoothed E-step, closed-form M-step, monotone
/// in the (diffuse-prior) log-likelihood.
pub fn exact_em_ar1(ys: &[f64], theta0: &Ar1Params, iterations: usize) -> Result<McemTrace> {
    smcem(&Ar1Family, ys, theta0, &McemSchedule::constant(iterations, 1), &EStep::Exact, 0)
}
