//! Weighted particle clouds.

use crate::error::{Error, Result};

/// A weighted particle set at one time step.
///
/// Weights are stored in log scale. Natural-scale accessors report weights in
/// the max-stabilized gauge `exp(lw_i - max_j lw_j)`; all estimators consume
/// weights only through the normalized ratios `w_i / sum_j w_j`, which the
/// gauge leaves untouched, so long observation records cannot underflow.
#[derive(Clone, Debug)]
pub struct ParticleCloud<S> {
    time_index: usize,
    positions: Vec<S>,
    log_weights: Vec<f64>,
}

impl<S: Copy> ParticleCloud<S> {
    /// Assemble a cloud from positions and log-weights, validating that the
    /// cloud is non-empty, lengths agree and not every weight is zero.
    pub fn new(time_index: usize, positions: Vec<S>, log_weights: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParameter("particle cloud must be non-empty".into()));
        }
        if positions.len() != log_weights.len() {
            return Err(Error::InvalidParameter(
                "positions and weights must have equal length".into(),
            ));
        }
        let cloud = Self { time_index, positions, log_weights };
        cloud.check_weights()?;
        Ok(cloud)
    }

    fn check_weights(&self) -> Result<()> {
        let mut all_zero = true;
        for &lw in &self.log_weights {
            if lw.is_nan() || lw == f64::INFINITY {
                return Err(Error::NonFiniteWeight { time: self.time_index });
            }
            if lw > f64::NEG_INFINITY {
                all_zero = false;
            }
        }
        if all_zero {
            if self.time_index == 0 {
                return Err(Error::DegenerateInitialization);
            }
            return Err(Error::WeightCollapse { time: self.time_index });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn time_index(&self) -> usize {
        self.time_index
    }

    pub fn positions(&self) -> &[S] {
        &self.positions
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    fn max_log_weight(&self) -> f64 {
        self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Unnormalized natural-scale weights in the max-stabilized gauge.
    pub fn weights(&self) -> Vec<f64> {
        let m = self.max_log_weight();
        self.log_weights.iter().map(|&lw| (lw - m).exp()).collect()
    }

    /// Sum of `weights()`.
    pub fn weight_sum(&self) -> f64 {
        let m = self.max_log_weight();
        self.log_weights.iter().map(|&lw| (lw - m).exp()).sum()
    }

    /// Weights normalized to sum to one.
    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        self.check_weights()?;
        let mut w = self.weights();
        let sum: f64 = w.iter().sum();
        for v in &mut w {
            *v /= sum;
        }
        Ok(w)
    }

    /// Effective sample size `(sum w)^2 / sum w^2`, in `[1, N]`.
    pub fn ess(&self) -> Result<f64> {
        self.check_weights()?;
        let w = self.weights();
        let s: f64 = w.iter().sum();
        let s2: f64 = w.iter().map(|v| v * v).sum();
        Ok(s * s / s2)
    }
}
