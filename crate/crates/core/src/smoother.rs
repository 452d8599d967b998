//! Smoothed-additive-functional estimators.
//!
//! Two families are provided. The trajectory estimators carry one running
//! functional value per particle through the resampling genealogy, so they
//! need no path storage but inherit the ancestral degeneracy of the particle
//! paths. The fixed-lag estimators instead freeze term `k` once time reaches
//! `k + lag`, reading the state pair off a sliding per-particle window of the
//! last `lag + 1` states; under forgetting of the conditional hidden chain a
//! moderate lag suppresses the degeneracy at a small bias cost.
//!
//! Each family comes in a weighted flavor (average under the current
//! normalized importance weights) and a resampled flavor (uniform average
//! after resampling).

use serde::{Deserialize, Serialize};

use crate::cloud::ParticleCloud;
use crate::engine::{ResampleSchedule, Resampler, SmcFilter};
use crate::error::{Error, Result};
use crate::rng::RngContract;
use crate::ssm::{resolve_lag, AdditiveFunctional, LagPolicy, Model, StepContext};

/// Which smoothed-functional estimator to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    TrajectoryWeighted,
    TrajectoryResampled,
    FixedLagWeighted,
    FixedLagResampled,
}

impl EstimatorKind {
    pub fn is_fixed_lag(self) -> bool {
        matches!(self, EstimatorKind::FixedLagWeighted | EstimatorKind::FixedLagResampled)
    }

    pub fn is_weighted(self) -> bool {
        matches!(self, EstimatorKind::TrajectoryWeighted | EstimatorKind::FixedLagWeighted)
    }

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::TrajectoryWeighted => "trajectory_weighted",
            EstimatorKind::TrajectoryResampled => "trajectory_resampled",
            EstimatorKind::FixedLagWeighted => "fixed_lag_weighted",
            EstimatorKind::FixedLagResampled => "fixed_lag_resampled",
        }
    }
}

/// A smoothed additive-functional estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothedEstimate {
    pub value: Vec<f64>,
    pub kind: EstimatorKind,
    pub n: usize,
    pub n_particles: usize,
    /// Resolved lag; `None` for trajectory estimators.
    pub lag: Option<usize>,
}

/// Weighting applied when a term matures or an estimate is finalized.
#[derive(Clone, Copy, Debug)]
pub enum MaturationWeights<'a> {
    Uniform,
    Normalized(&'a [f64]),
}

/// Reduce per-particle vectors to a single statistic vector.
///
/// Both finalizers funnel through this function in the same particle order,
/// which is what makes the lag estimator with `lag >= n` bit-identical to
/// the trajectory estimator under identical streams.
fn reduce(values: &[f64], n_particles: usize, dim: usize, weights: &MaturationWeights<'_>) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    match weights {
        MaturationWeights::Uniform => {
            for j in 0..n_particles {
                for d in 0..dim {
                    out[d] += values[j * dim + d];
                }
            }
            for v in &mut out {
                *v /= n_particles as f64;
            }
        }
        MaturationWeights::Normalized(w) => {
            for j in 0..n_particles {
                for d in 0..dim {
                    out[d] += w[j] * values[j * dim + d];
                }
            }
        }
    }
    out
}

/// Per-particle running functional values `t_k^i`, advanced through the
/// resampling genealogy:
///
/// ```text
/// t_{k+1}^i = t_k^i       + s_k(x_k^i, x_{k+1}^i)      without resampling
/// t_{k+1}^i = t_k^{I_k^i} + s_k(x_k^{I_k^i}, x_{k+1}^i) with resampling
/// ```
#[derive(Clone, Debug)]
pub struct TrajectoryAccumulator {
    dim: usize,
    n_particles: usize,
    time: usize,
    values: Vec<f64>,
    scratch: Vec<f64>,
}

impl TrajectoryAccumulator {
    pub fn new(n_particles: usize, dim: usize) -> Self {
        Self {
            dim,
            n_particles,
            time: 0,
            values: vec![0.0; n_particles * dim],
            scratch: vec![0.0; n_particles * dim],
        }
    }

    pub fn time(&self) -> usize {
        self.time
    }

    /// Per-particle values, `dim` entries per particle.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Advance one transition. `increments` holds `s_k` evaluated on each
    /// particle's (parent, new state) pair, `dim` entries per particle.
    pub fn advance(&mut self, ancestors: Option<&[usize]>, increments: &[f64]) -> Result<()> {
        if increments.len() != self.n_particles * self.dim {
            return Err(Error::InvalidParameter(format!(
                "increment buffer has length {}, expected {}",
                increments.len(),
                self.n_particles * self.dim
            )));
        }
        if let Some(anc) = ancestors {
            if anc.len() != self.n_particles {
                return Err(Error::InvalidParameter("ancestor vector length mismatch".into()));
            }
            for (i, &a) in anc.iter().enumerate() {
                self.scratch[i * self.dim..(i + 1) * self.dim]
                    .copy_from_slice(&self.values[a * self.dim..(a + 1) * self.dim]);
            }
            std::mem::swap(&mut self.values, &mut self.scratch);
        }
        for (v, inc) in self.values.iter_mut().zip(increments) {
            *v += inc;
        }
        self.time += 1;
        Ok(())
    }

    /// Average the per-particle values into the final estimate.
    pub fn finalize<S: Copy>(
        &self,
        cloud: &ParticleCloud<S>,
        kind: EstimatorKind,
    ) -> Result<SmoothedEstimate> {
        if kind.is_fixed_lag() {
            return Err(Error::InvalidParameter(format!(
                "trajectory accumulator cannot finalize a {} estimate",
                kind.name()
            )));
        }
        if cloud.time_index() != self.time {
            return Err(Error::TimeMismatch { expected: self.time, got: cloud.time_index() });
        }
        let value = if kind.is_weighted() {
            let w = cloud.normalized_weights()?;
            reduce(&self.values, self.n_particles, self.dim, &MaturationWeights::Normalized(&w))
        } else {
            reduce(&self.values, self.n_particles, self.dim, &MaturationWeights::Uniform)
        };
        Ok(SmoothedEstimate {
            value,
            kind,
            n: self.time,
            n_particles: self.n_particles,
            lag: None,
        })
    }
}

/// Sliding per-particle history of the last `lag + 1` states plus the frozen
/// contribution of every term that has already matured.
///
/// After processing time `m`, `matured_total` holds exactly the terms
/// `k <= m - lag`; everything later waits in the window. Peak storage is
/// `N * (lag + 1)` states, independent of the horizon.
#[derive(Clone, Debug)]
pub struct LagWindow<S> {
    lag: usize,
    dim: usize,
    n_particles: usize,
    /// Time of the newest column.
    time: usize,
    /// Time of the oldest column.
    start: usize,
    cols: std::collections::VecDeque<Vec<S>>,
    matured: Vec<f64>,
    next_term: usize,
}

impl<S: Copy> LagWindow<S> {
    pub fn new(lag: usize, dim: usize, initial_positions: &[S]) -> Result<Self> {
        if lag == 0 {
            return Err(Error::InvalidParameter("lag must be at least 1".into()));
        }
        if initial_positions.is_empty() {
            return Err(Error::InvalidParameter("window needs at least one particle".into()));
        }
        let mut cols = std::collections::VecDeque::with_capacity(lag + 1);
        cols.push_back(initial_positions.to_vec());
        Ok(Self {
            lag,
            dim,
            n_particles: initial_positions.len(),
            time: 0,
            start: 0,
            cols,
            matured: vec![0.0; dim],
            next_term: 0,
        })
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn time(&self) -> usize {
        self.time
    }

    /// Index of the next term to mature.
    pub fn next_term(&self) -> usize {
        self.next_term
    }

    pub fn matured_total(&self) -> &[f64] {
        &self.matured
    }

    /// Number of retained state columns (at most `lag + 1`).
    pub fn buffer_len(&self) -> usize {
        self.cols.len()
    }

    /// Rewire every particle's history through the resampling ancestors.
    pub fn relocate(&mut self, ancestors: &[usize]) {
        for col in &mut self.cols {
            let old = col.clone();
            for (i, &a) in ancestors.iter().enumerate() {
                col[i] = old[a];
            }
        }
    }

    /// Append the states of the next time step, dropping the column that
    /// falls out of the window.
    pub fn append(&mut self, positions: &[S]) {
        debug_assert_eq!(positions.len(), self.n_particles);
        self.cols.push_back(positions.to_vec());
        self.time += 1;
        if self.cols.len() > self.lag + 1 {
            self.cols.pop_front();
            self.start += 1;
        }
        debug_assert!(self.cols.len() <= self.lag + 1);
    }

    /// Freeze term `k = next_term` into `matured_total` under the given
    /// weights: `matured += sum_j w_j s_k(window_j[k], window_j[k+1])`.
    pub fn mature<F: AdditiveFunctional<S>>(
        &mut self,
        functional: &F,
        ctx: &StepContext<'_>,
        weights: &MaturationWeights<'_>,
    ) -> Result<()> {
        let k = self.next_term;
        if k < self.start || k + 1 > self.time {
            return Err(Error::WindowUnderflow { term: k, start: self.start });
        }
        let ctx = StepContext { k, ..*ctx };
        let col = &self.cols[k - self.start];
        let col_next = &self.cols[k + 1 - self.start];
        let mut inc = vec![0.0; self.dim];
        let uniform = 1.0 / self.n_particles as f64;
        for j in 0..self.n_particles {
            functional.increment(&ctx, &col[j], &col_next[j], &mut inc);
            let wj = match weights {
                MaturationWeights::Uniform => uniform,
                MaturationWeights::Normalized(w) => w[j],
            };
            for d in 0..self.dim {
                self.matured[d] += wj * inc[d];
            }
        }
        self.next_term += 1;
        Ok(())
    }

    /// Mature every remaining term against the final cloud and return the
    /// estimate vector.
    ///
    /// Remaining terms are accumulated per particle in time order and then
    /// reduced, mirroring the trajectory accumulator exactly.
    pub fn finalize<F: AdditiveFunctional<S>>(
        &self,
        functional: &F,
        ys: &[f64],
        weights: &MaturationWeights<'_>,
    ) -> Result<Vec<f64>> {
        let n = self.time;
        if self.next_term < self.start {
            return Err(Error::WindowUnderflow { term: self.next_term, start: self.start });
        }
        let mut tails = vec![0.0; self.n_particles * self.dim];
        let mut inc = vec![0.0; self.dim];
        for j in 0..self.n_particles {
            for k in self.next_term..n {
                let ctx = StepContext { k, n, ys };
                functional.increment(&ctx, &self.cols[k - self.start][j], &self.cols[k + 1 - self.start][j], &mut inc);
                for d in 0..self.dim {
                    tails[j * self.dim + d] += inc[d];
                }
            }
        }
        let reduced = reduce(&tails, self.n_particles, self.dim, weights);
        Ok(self.matured.iter().zip(&reduced).map(|(m, r)| m + r).collect())
    }
}

/// Smoothing run configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    pub n_particles: usize,
    pub kind: EstimatorKind,
    pub lag: LagPolicy,
    pub resampler: Resampler,
    #[serde(default)]
    pub schedule: ResampleSchedule,
}

impl SmootherConfig {
    pub fn new(n_particles: usize, kind: EstimatorKind, lag: LagPolicy, resampler: Resampler) -> Self {
        Self { n_particles, kind, lag, resampler, schedule: ResampleSchedule::EveryStep }
    }
}

/// Run the particle filter over `ys` and estimate the smoothed additive
/// functional with the configured estimator. Deterministic given `seed`.
pub fn smooth<M, F>(
    model: &M,
    ys: &[f64],
    functional: &F,
    config: &SmootherConfig,
    seed: u64,
) -> Result<SmoothedEstimate>
where
    M: Model,
    F: AdditiveFunctional<M::State>,
{
    smooth_with(model, ys, functional, config, RngContract::new(seed))
}

/// As [`smooth`], taking a prepared stream contract.
pub fn smooth_with<M, F>(
    model: &M,
    ys: &[f64],
    functional: &F,
    config: &SmootherConfig,
    rng: RngContract,
) -> Result<SmoothedEstimate>
where
    M: Model,
    F: AdditiveFunctional<M::State>,
{
    if ys.len() < 2 {
        return Err(Error::InvalidParameter("smoothing requires a horizon of at least 1".into()));
    }
    let mut filter = SmcFilter::new(
        model,
        ys,
        config.n_particles,
        config.resampler,
        config.schedule,
        rng,
    )?;
    if config.kind.is_fixed_lag() {
        run_fixed_lag(&mut filter, functional, config)
    } else {
        run_trajectory(&mut filter, functional, config)
    }
}

fn run_trajectory<M, F>(
    filter: &mut SmcFilter<'_, M>,
    functional: &F,
    config: &SmootherConfig,
) -> Result<SmoothedEstimate>
where
    M: Model,
    F: AdditiveFunctional<M::State>,
{
    let n = filter.horizon();
    let ys = filter.observations();
    let dim = functional.dim();
    let n_particles = config.n_particles;
    let mut acc = TrajectoryAccumulator::new(n_particles, dim);
    let mut incs = vec![0.0; n_particles * dim];
    for k in 0..n {
        let rec = filter.step()?;
        let ctx = StepContext { k, n, ys };
        let new_pos = filter.cloud().positions();
        for i in 0..n_particles {
            functional.increment(&ctx, &rec.parents[i], &new_pos[i], &mut incs[i * dim..(i + 1) * dim]);
        }
        acc.advance(rec.ancestors.as_deref(), &incs)?;
    }
    acc.finalize(filter.cloud(), config.kind)
}

fn run_fixed_lag<M, F>(
    filter: &mut SmcFilter<'_, M>,
    functional: &F,
    config: &SmootherConfig,
) -> Result<SmoothedEstimate>
where
    M: Model,
    F: AdditiveFunctional<M::State>,
{
    let n = filter.horizon();
    let ys = filter.observations();
    let lag = resolve_lag(config.lag, n)?;
    let dim = functional.dim();
    let weighted = config.kind.is_weighted();
    let mut win = LagWindow::new(lag, dim, filter.cloud().positions())?;

    for m in 0..n {
        let due = m >= lag;
        debug_assert!(!due || win.next_term() + lag == m);
        // The weighted estimator freezes term m - lag under the time-m
        // normalized weights, before the time-m resampling.
        if due && weighted {
            let w = filter.cloud().normalized_weights()?;
            let ctx = StepContext { k: m - lag, n, ys };
            win.mature(functional, &ctx, &MaturationWeights::Normalized(&w))?;
        }
        let pre_weights = if due && !weighted {
            Some(filter.cloud().normalized_weights()?)
        } else {
            None
        };
        let rec = filter.step()?;
        if let Some(anc) = &rec.ancestors {
            win.relocate(anc);
        }
        // The resampled estimator freezes the same term on the
        // post-resampling uniform cloud; when resampling was skipped the
        // weights were not reset, so it coincides with the weighted rule.
        if due && !weighted {
            let ctx = StepContext { k: m - lag, n, ys };
            match &rec.ancestors {
                Some(_) => win.mature(functional, &ctx, &MaturationWeights::Uniform)?,
                None => {
                    let w = pre_weights.expect("captured before step");
                    win.mature(functional, &ctx, &MaturationWeights::Normalized(&w))?
                }
            }
        }
        win.append(filter.cloud().positions());
    }

    // Terms with k + lag > n mature against the time-n cloud.
    let value = if weighted {
        let w = filter.cloud().normalized_weights()?;
        win.finalize(functional, ys, &MaturationWeights::Normalized(&w))?
    } else {
        win.finalize(functional, ys, &MaturationWeights::Uniform)?
    };
    Ok(SmoothedEstimate {
        value,
        kind: config.kind,
        n,
        n_particles: config.n_particles,
        lag: Some(lag),
    })
}
