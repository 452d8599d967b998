//! JSON-facing configuration types and model-dispatch helpers.
//!
//! The CLI and the Python bindings both funnel through these, so the JSON
//! schema lives in one place. Model selection is a tagged object:
//!
//! ```json
//! {"kind": "ar1", "a": 0.98, "sigma_w": 0.2, "sigma_v": 1.0}
//! {"kind": "sv", "beta": 0.63, "alpha": 0.975, "sigma": 0.16, "proposal": "optimal"}
//! ```

use serde::{Deserialize, Serialize};

use crate::em::{smcem, EStep, ExponentialFamily, McemSchedule, McemTrace, Ar1Family, SvFamily};
use crate::engine::{AncestryLog, ResampleSchedule, Resampler, SmcFilter};
use crate::error::{Error, Result};
use crate::kalman::{exact_statistics, kalman_posterior};
use crate::models::{ar1_model, simulate, sv_model, Ar1Params, SvParams, SvProposal};
use crate::rng::RngContract;
use crate::smoother::{smooth, SmoothedEstimate, SmootherConfig};
use crate::ssm::{Model, SufficientStatistics};

/// Model selection and parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Ar1 {
        a: f64,
        sigma_w: f64,
        sigma_v: f64,
    },
    Sv {
        beta: f64,
        alpha: f64,
        sigma: f64,
        #[serde(default)]
        proposal: SvProposal,
    },
}

impl ModelConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelConfig::Ar1 { .. } => "ar1",
            ModelConfig::Sv { .. } => "sv",
        }
    }

    pub fn ar1_params(&self) -> Option<Ar1Params> {
        match *self {
            ModelConfig::Ar1 { a, sigma_w, sigma_v } => Some(Ar1Params { a, sigma_w, sigma_v }),
            _ => None,
        }
    }

    pub fn sv_params(&self) -> Option<(SvParams, SvProposal)> {
        match *self {
            ModelConfig::Sv { beta, alpha, sigma, proposal } => {
                Some((SvParams { beta, alpha, sigma }, proposal))
            }
            _ => None,
        }
    }
}

/// Simulate a dataset under the configured model. Returns the hidden states
/// (component-flattened) and observations.
pub fn simulate_config(model: &ModelConfig, n: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let rng = RngContract::new(seed);
    match model {
        ModelConfig::Ar1 { .. } => {
            let m = ar1_model(model.ar1_params().unwrap())?;
            let (xs, ys) = simulate(&m, n, &rng)?;
            Ok((xs.iter().map(|x| m.state_components(x)).collect(), ys))
        }
        ModelConfig::Sv { .. } => {
            let (params, proposal) = model.sv_params().unwrap();
            let m = sv_model(params, proposal)?;
            let (xs, ys) = simulate(&m, n, &rng)?;
            Ok((xs.iter().map(|x| m.state_components(x)).collect(), ys))
        }
    }
}

/// Smooth the model's own sufficient statistics over `ys`.
pub fn smooth_config(
    model: &ModelConfig,
    ys: &[f64],
    config: &SmootherConfig,
    seed: u64,
) -> Result<SmoothedEstimate> {
    match model {
        ModelConfig::Ar1 { .. } => {
            let fam = Ar1Family;
            let m = fam.build_model(&model.ar1_params().unwrap())?;
            smooth(&m, ys, &fam.functional(), config, seed)
        }
        ModelConfig::Sv { .. } => {
            let (params, proposal) = model.sv_params().unwrap();
            let fam = SvFamily { proposal };
            let m = fam.build_model(&params)?;
            smooth(&m, ys, &fam.functional(), config, seed)
        }
    }
}

/// Exact smoothed statistics under the configured model, when an exact
/// smoother exists (AR(1) only).
pub fn exact_statistics_config(model: &ModelConfig, ys: &[f64]) -> Result<Option<SufficientStatistics>> {
    match model.ar1_params() {
        Some(p) => {
            let post = kalman_posterior(&p, ys)?;
            Ok(Some(exact_statistics(&post, ys)?))
        }
        None => Ok(None),
    }
}

/// MCEM run configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McemConfig {
    pub iterations: usize,
    pub warm_iterations: usize,
    pub warm_particles: usize,
    pub final_particles: usize,
    /// Initial parameters; must match the model kind.
    pub theta0: ThetaConfig,
    /// Replaces the particle E-step with the exact Kalman E-step (AR(1) only).
    #[serde(default)]
    pub oracle: bool,
}

/// Initial parameter vector for EM; variant is inferred from the field names.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaConfig {
    Ar1 { a: f64, sigma_w: f64, sigma_v: f64 },
    Sv { beta: f64, alpha: f64, sigma: f64 },
}

impl McemConfig {
    pub fn schedule(&self) -> Result<McemSchedule> {
        if self.oracle || self.warm_iterations >= self.iterations {
            Ok(McemSchedule::constant(self.iterations, self.warm_particles))
        } else {
            crate::em::mcem_schedule(
                self.warm_iterations,
                self.warm_particles,
                self.iterations,
                self.final_particles,
            )
        }
    }
}

/// Run MCEM under the configured model/estimator.
pub fn mcem_config(
    model: &ModelConfig,
    ys: &[f64],
    mcem: &McemConfig,
    smoother: &SmootherConfig,
    seed: u64,
) -> Result<McemTrace> {
    let schedule = mcem.schedule()?;
    let estep = if mcem.oracle {
        EStep::Exact
    } else {
        EStep::Particle {
            kind: smoother.kind,
            lag: smoother.lag,
            resampler: smoother.resampler,
            schedule: smoother.schedule,
        }
    };
    match model {
        ModelConfig::Ar1 { .. } => {
            let theta0 = match mcem.theta0 {
                ThetaConfig::Ar1 { a, sigma_w, sigma_v } => Ar1Params::new(a, sigma_w, sigma_v)?,
                ThetaConfig::Sv { .. } => {
                    return Err(Error::InvalidConfig("theta0 does not match the ar1 model".into()))
                }
            };
            smcem(&Ar1Family, ys, &theta0, &schedule, &estep, seed)
        }
        ModelConfig::Sv { .. } => {
            if mcem.oracle {
                return Err(Error::InvalidConfig("the SV model has no exact E-step".into()));
            }
            let theta0 = match mcem.theta0 {
                ThetaConfig::Sv { beta, alpha, sigma } => SvParams::new(beta, alpha, sigma)?,
                ThetaConfig::Ar1 { .. } => {
                    return Err(Error::InvalidConfig("theta0 does not match the sv model".into()))
                }
            };
            let (_, proposal) = model.sv_params().unwrap();
            smcem(&SvFamily { proposal }, ys, &theta0, &schedule, &estep, seed)
        }
    }
}

fn degeneracy_profile_impl<M: Model>(
    model: &M,
    ys: &[f64],
    n_particles: usize,
    resampler: Resampler,
    schedule: ResampleSchedule,
    seed: u64,
) -> Result<Vec<usize>> {
    let mut filter = SmcFilter::new(model, ys, n_particles, resampler, schedule, RngContract::new(seed))?;
    let mut log = AncestryLog::new(n_particles);
    let mut counts = vec![n_particles];
    while !filter.is_done() {
        let rec = filter.step()?;
        log.record(rec.ancestors.as_deref());
        counts.push(log.unique_ancestor_count(0)?);
    }
    Ok(counts)
}

/// Unique time-0 ancestor counts of the running cloud, per time step, on a
/// freshly simulated dataset (the ancestral-collapse profile).
pub fn degeneracy_profile(
    model: &ModelConfig,
    n: usize,
    n_particles: usize,
    resampler: Resampler,
    schedule: ResampleSchedule,
    seed: u64,
) -> Result<Vec<usize>> {
    let data_rng = RngContract::new(seed).child(0xDA7A);
    let run_seed = crate::rng::derive_seed(seed, 0x5EED);
    match model {
        ModelConfig::Ar1 { .. } => {
            let m = ar1_model(model.ar1_params().unwrap())?;
            let (_, ys) = simulate(&m, n, &data_rng)?;
            degeneracy_profile_impl(&m, &ys, n_particles, resampler, schedule, run_seed)
        }
        ModelConfig::Sv { .. } => {
            let (params, proposal) = model.sv_params().unwrap();
            let m = sv_model(params, proposal)?;
            let (_, ys) = simulate(&m, n, &data_rng)?;
            degeneracy_profile_impl(&m, &ys, n_particles, resampler, schedule, run_seed)
        }
    }
}
