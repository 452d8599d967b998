//! Concrete state space models: the noisily observed AR(1) model and the
//! stochastic volatility model, with their sufficient statistics.

mod ar1;
mod sv;

pub use ar1::{ar1_model, ar1_statistics, Ar1Model, Ar1Params, Ar1Statistics};
pub use sv::{sv_model, sv_statistics, SvModel, SvParams, SvProposal, SvStatistics};

use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::rng::{RngContract, Stream, StreamTag};
use crate::ssm::Model;

pub(crate) const LN_2PI: f64 = 1.8378770664093453;

/// Log-density of N(mean, sd^2) at `x`. A zero `sd` degenerates to a point
/// mass: +inf at the mean, -inf elsewhere.
pub(crate) fn log_gaussian(x: f64, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return if x == mean { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    let z = (x - mean) / sd;
    -0.5 * LN_2PI - sd.ln() - 0.5 * z * z
}

pub(crate) fn sample_gaussian(mean: f64, sd: f64, stream: &mut Stream) -> f64 {
    let z: f64 = StandardNormal.sample(stream);
    mean + sd * z
}

/// Sample a trajectory and observation record of horizon `n` under the
/// generative model. Deterministic given the contract.
pub fn simulate<M: Model>(model: &M, n: usize, rng: &RngContract) -> Result<(Vec<M::State>, Vec<f64>)> {
    let mut stream = rng.stream(0, 0, StreamTag::Simulate);
    let x0 = model.sample_generative_initial(&mut stream)?;
    Ok(simulate_path(model, x0, n, &mut stream))
}

/// Sample a trajectory started from a fixed `x0`.
pub fn simulate_from<M: Model>(model: &M, x0: M::State, n: usize, rng: &RngContract) -> (Vec<M::State>, Vec<f64>) {
    let mut stream = rng.stream(0, 0, StreamTag::Simulate);
    simulate_path(model, x0, n, &mut stream)
}

fn simulate_path<M: Model>(model: &M, x0: M::State, n: usize, stream: &mut Stream) -> (Vec<M::State>, Vec<f64>) {
    let mut xs = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n + 1);
    xs.push(x0);
    ys.push(model.sample_observation(&x0, stream));
    for k in 0..n {
        let x = model.sample_transition(&xs[k], stream);
        ys.push(model.sample_observation(&x, stream));
        xs.push(x);
    }
    (xs, ys)
}
