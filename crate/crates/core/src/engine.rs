//! One-step particle filter dynamics: initialization, mutation through the
//! proposal kernel with weight update, and resampling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::ParticleCloud;
use crate::error::{Error, Result};
use crate::rng::{RngContract, StreamTag};
use crate::ssm::Model;

/// Resampling scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampler {
    Multinomial,
    Systematic,
}

/// When to resample.
///
/// The analysis assumes resampling at every iteration, which is the default;
/// `EssBelow` triggers only when the effective sample size drops below the
/// given fraction of `N`, and `Never` is for degeneracy demonstrations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleSchedule {
    EveryStep,
    Never,
    EssBelow(f64),
}

impl Default for ResampleSchedule {
    fn default() -> Self {
        ResampleSchedule::EveryStep
    }
}

const PAR_MIN_LEN: usize = 1024;

/// Draw `N` initial particles from the model's initial sampler and assign the
/// initial importance weights `W_0`.
pub fn init_cloud<M: Model>(
    model: &M,
    y0: f64,
    n_particles: usize,
    rng: &RngContract,
) -> Result<ParticleCloud<M::State>> {
    if n_particles == 0 {
        return Err(Error::InvalidParameter("need at least one particle".into()));
    }
    let pairs: Vec<(M::State, f64)> = (0..n_particles)
        .into_par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|i| {
            let mut stream = rng.stream(0, i, StreamTag::Init);
            let x = model.sample_initial(y0, &mut stream);
            let lw = model.log_initial_weight(&x, y0);
            (x, lw)
        })
        .collect();
    let (positions, log_weights) = pairs.into_iter().unzip();
    ParticleCloud::new(0, positions, log_weights)
}

/// Extend every particle by one proposal draw and update its weight:
/// position `i` becomes a draw from `R_k(x_i, .)` and the log-weight gains
/// `log W_{k+1}(x_i, x_i')`. Draws are independent across particles.
pub fn mutate<M: Model>(
    cloud: &ParticleCloud<M::State>,
    model: &M,
    y_next: f64,
    rng: &RngContract,
) -> Result<ParticleCloud<M::State>> {
    let time_next = cloud.time_index() + 1;
    let positions = cloud.positions();
    let log_weights = cloud.log_weights();
    let pairs: Vec<(M::State, f64)> = (0..cloud.len())
        .into_par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|i| {
            let mut stream = rng.stream(time_next, i, StreamTag::Proposal);
            let x = positions[i];
            let x_next = model.sample_proposal(&x, y_next, &mut stream);
            let lw = log_weights[i] + model.log_weight(&x, &x_next, y_next);
            (x_next, lw)
        })
        .collect();
    let (positions, log_weights) = pairs.into_iter().unzip();
    ParticleCloud::new(time_next, positions, log_weights)
}

fn uniform_cloud<S: Copy>(
    cloud: &ParticleCloud<S>,
    ancestors: &[usize],
) -> Result<(ParticleCloud<S>, Vec<usize>)> {
    let positions: Vec<S> = ancestors.iter().map(|&j| cloud.positions()[j]).collect();
    let resampled = ParticleCloud::new(cloud.time_index(), positions, vec![0.0; ancestors.len()])?;
    Ok((resampled, ancestors.to_vec()))
}

/// Multinomial resampling: ancestor indices are i.i.d. with
/// `P(I = j) = w_j / sum w`, and all weights are reset to uniform.
///
/// All draws come from the single per-step resampling stream, so offspring
/// assignment is reproducible regardless of threading.
pub fn multinomial_resample<S: Copy>(
    cloud: &ParticleCloud<S>,
    rng: &RngContract,
) -> Result<(ParticleCloud<S>, Vec<usize>)> {
    let w = cloud.normalized_weights()?;
    let n = cloud.len();
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &wi in &w {
        acc += wi;
        cum.push(acc);
    }
    cum[n - 1] = 1.0;
    let mut stream = rng.stream(cloud.time_index(), 0, StreamTag::Resample);
    let ancestors: Vec<usize> = (0..n)
        .map(|_| {
            let u: f64 = stream.random();
            cum.partition_point(|&c| c <= u).min(n - 1)
        })
        .collect();
    uniform_cloud(cloud, &ancestors)
}

/// Systematic resampling: a single uniform `u` places the comb
/// `(u + i) / N` on the cumulative normalized weights; particle `j` gets
/// `floor(N C_j - u) - floor(N C_{j-1} - u)` offspring, which deviates from
/// `N w_j` by less than one.
pub fn systematic_resample<S: Copy>(
    cloud: &ParticleCloud<S>,
    rng: &RngContract,
) -> Result<(ParticleCloud<S>, Vec<usize>)> {
    let w = cloud.normalized_weights()?;
    let n = cloud.len();
    let mut stream = rng.stream(cloud.time_index(), 0, StreamTag::Resample);
    let u: f64 = stream.random();
    let nf = n as f64;
    let mut ancestors = Vec::with_capacity(n);
    let mut cum = 0.0;
    let mut prev_floor = (-u).floor();
    for (j, &wj) in w.iter().enumerate() {
        cum += wj;
        let c = if j + 1 == n { 1.0 } else { cum };
        let f = (nf * c - u).floor();
        for _ in 0..(f - prev_floor) as usize {
            ancestors.push(j);
        }
        prev_floor = f;
    }
    debug_assert_eq!(ancestors.len(), n);
    uniform_cloud(cloud, &ancestors)
}

/// Dispatch on the configured scheme.
pub fn resample<S: Copy>(
    cloud: &ParticleCloud<S>,
    scheme: Resampler,
    rng: &RngContract,
) -> Result<(ParticleCloud<S>, Vec<usize>)> {
    match scheme {
        Resampler::Multinomial => multinomial_resample(cloud, rng),
        Resampler::Systematic => systematic_resample(cloud, rng),
    }
}

/// Resampling genealogy of a filter run: one entry per transition, `None`
/// where resampling was skipped.
#[derive(Clone, Debug, Default)]
pub struct AncestryLog {
    n_particles: usize,
    steps: Vec<Option<Vec<usize>>>,
}

impl AncestryLog {
    pub fn new(n_particles: usize) -> Self {
        Self { n_particles, steps: Vec::new() }
    }

    pub fn record(&mut self, ancestors: Option<&[usize]>) {
        self.steps.push(ancestors.map(|a| a.to_vec()));
    }

    /// Number of recorded transitions.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Number of distinct time-`back_to` ancestors of the current cloud.
    pub fn unique_ancestor_count(&self, back_to: usize) -> Result<usize> {
        if back_to > self.steps.len() {
            return Err(Error::TimeMismatch { expected: self.steps.len(), got: back_to });
        }
        let mut idx: Vec<usize> = (0..self.n_particles).collect();
        for step in self.steps[back_to..].iter().rev() {
            if let Some(anc) = step {
                for i in &mut idx {
                    *i = anc[*i];
                }
            }
        }
        idx.sort_unstable();
        idx.dedup();
        Ok(idx.len())
    }
}

/// Outcome of one filter transition.
#[derive(Clone, Debug)]
pub struct StepRecord<S> {
    /// Ancestor indices of the resampling applied before mutation, if any.
    pub ancestors: Option<Vec<usize>>,
    /// Mutation inputs: the (post-resampling) positions at the previous time.
    pub parents: Vec<S>,
}

/// A particle filter run over a fixed observation record: resample according
/// to the schedule, then mutate, one transition per `step` call.
pub struct SmcFilter<'a, M: Model> {
    model: &'a M,
    ys: &'a [f64],
    resampler: Resampler,
    schedule: ResampleSchedule,
    rng: RngContract,
    cloud: ParticleCloud<M::State>,
}

impl<'a, M: Model> SmcFilter<'a, M> {
    pub fn new(
        model: &'a M,
        ys: &'a [f64],
        n_particles: usize,
        resampler: Resampler,
        schedule: ResampleSchedule,
        rng: RngContract,
    ) -> Result<Self> {
        if ys.is_empty() {
            return Err(Error::InvalidParameter("observation record is empty".into()));
        }
        if let ResampleSchedule::EssBelow(f) = schedule {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidParameter(format!(
                    "ESS trigger must be a fraction in [0, 1], got {f}"
                )));
            }
        }
        let cloud = init_cloud(model, ys[0], n_particles, &rng)?;
        Ok(Self { model, ys, resampler, schedule, rng, cloud })
    }

    pub fn cloud(&self) -> &ParticleCloud<M::State> {
        &self.cloud
    }

    pub fn observations(&self) -> &'a [f64] {
        self.ys
    }

    pub fn time(&self) -> usize {
        self.cloud.time_index()
    }

    /// Horizon `n` (number of transitions).
    pub fn horizon(&self) -> usize {
        self.ys.len() - 1
    }

    pub fn is_done(&self) -> bool {
        self.time() >= self.horizon()
    }

    fn should_resample(&self) -> Result<bool> {
        Ok(match self.schedule {
            ResampleSchedule::EveryStep => true,
            ResampleSchedule::Never => false,
            ResampleSchedule::EssBelow(f) => self.cloud.ess()? < f * self.cloud.len() as f64,
        })
    }

    /// Advance one transition; errors carry the failing time index.
    pub fn step(&mut self) -> Result<StepRecord<M::State>> {
        if self.is_done() {
            return Err(Error::TimeMismatch { expected: self.horizon(), got: self.time() + 1 });
        }
        let (source, ancestors) = if self.should_resample()? {
            let (resampled, anc) = resample(&self.cloud, self.resampler, &self.rng)?;
            (resampled, Some(anc))
        } else {
            (self.cloud.clone(), None)
        };
        let parents = source.positions().to_vec();
        self.cloud = mutate(&source, self.model, self.ys[self.time() + 1], &self.rng)?;
        Ok(StepRecord { ancestors, parents })
    }
}
