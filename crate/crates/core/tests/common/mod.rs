//! Shared test support: a full-history recorder for small particle runs and
//! brute-force evaluation of the smoothed-functional estimators from the
//! recorded paths and weights. The oracle never touches the accumulator or
//! window code paths it is used to check.

use fixlag::engine::{ResampleSchedule, Resampler, SmcFilter};
use fixlag::rng::RngContract;
use fixlag::smoother::EstimatorKind;
use fixlag::ssm::{AdditiveFunctional, Model, StepContext};

/// Complete history of one filter run over scalar states.
pub struct RunHistory {
    /// Per time m: the N surviving paths x_{0:m} of the weighted cloud
    /// (post-mutation, before the time-m resampling).
    pub paths: Vec<Vec<Vec<f64>>>,
    /// Per time m: normalized weights of that cloud.
    pub weights: Vec<Vec<f64>>,
    /// Per transition m (0..n-1): the paths right after the time-m
    /// resampling, or `None` when resampling was skipped.
    pub resampled_paths: Vec<Option<Vec<Vec<f64>>>>,
}

/// Drive the filter exactly as `smooth` does, recording everything.
pub fn record_run<M: Model<State = f64>>(
    model: &M,
    ys: &[f64],
    n_particles: usize,
    resampler: Resampler,
    schedule: ResampleSchedule,
    seed: u64,
) -> RunHistory {
    let mut filter = SmcFilter::new(
        model,
        ys,
        n_particles,
        resampler,
        schedule,
        RngContract::new(seed),
    )
    .unwrap();
    let mut paths: Vec<Vec<f64>> = filter.cloud().positions().iter().map(|&x| vec![x]).collect();
    let mut history = RunHistory {
        paths: vec![paths.clone()],
        weights: vec![filter.cloud().normalized_weights().unwrap()],
        resampled_paths: Vec::new(),
    };
    while !filter.is_done() {
        let rec = filter.step().unwrap();
        match &rec.ancestors {
            Some(anc) => {
                paths = anc.iter().map(|&a| paths[a].clone()).collect();
                history.resampled_paths.push(Some(paths.clone()));
            }
            None => history.resampled_paths.push(None),
        }
        for (path, &x) in paths.iter_mut().zip(filter.cloud().positions()) {
            path.push(x);
        }
        history.paths.push(paths.clone());
        history.weights.push(filter.cloud().normalized_weights().unwrap());
    }
    history
}

fn path_functional<F: AdditiveFunctional<f64>>(f: &F, path: &[f64], ys: &[f64], n: usize) -> Vec<f64> {
    let mut total = vec![0.0; f.dim()];
    let mut inc = vec![0.0; f.dim()];
    for k in 0..n {
        f.increment(&StepContext { k, n, ys }, &path[k], &path[k + 1], &mut inc);
        for (t, v) in total.iter_mut().zip(&inc) {
            *t += v;
        }
    }
    total
}

/// Brute-force the configured estimator from the recorded history.
pub fn oracle_estimate<F: AdditiveFunctional<f64>>(
    history: &RunHistory,
    f: &F,
    ys: &[f64],
    kind: EstimatorKind,
    lag: usize,
) -> Vec<f64> {
    let n = history.paths.len() - 1;
    let n_particles = history.weights[0].len();
    let dim = f.dim();
    match kind {
        EstimatorKind::TrajectoryWeighted => {
            let mut out = vec![0.0; dim];
            for (j, path) in history.paths[n].iter().enumerate() {
                let t = path_functional(f, path, ys, n);
                for d in 0..dim {
                    out[d] += history.weights[n][j] * t[d];
                }
            }
            out
        }
        EstimatorKind::TrajectoryResampled => {
            let mut out = vec![0.0; dim];
            for path in &history.paths[n] {
                let t = path_functional(f, path, ys, n);
                for d in 0..dim {
                    out[d] += t[d] / n_particles as f64;
                }
            }
            out
        }
        EstimatorKind::FixedLagWeighted => {
            // sum_k sum_j w_m[j] s_k(path_j at time m), m = (k + lag) ^ n
            let mut out = vec![0.0; dim];
            let mut inc = vec![0.0; dim];
            for k in 0..n {
                let m = (k + lag).min(n);
                let ctx = StepContext { k, n, ys };
                for (j, path) in history.paths[m].iter().enumerate() {
                    f.increment(&ctx, &path[k], &path[k + 1], &mut inc);
                    for d in 0..dim {
                        out[d] += history.weights[m][j] * inc[d];
                    }
                }
            }
            out
        }
        EstimatorKind::FixedLagResampled => {
            // Terms maturing before the horizon read the post-resampling
            // uniform cloud at time m (or the weighted cloud when resampling
            // was skipped); terms with k + lag > n read the final cloud with
            // uniform weights.
            let mut out = vec![0.0; dim];
            let mut inc = vec![0.0; dim];
            for k in 0..n {
                let m = (k + lag).min(n);
                let ctx = StepContext { k, n, ys };
                if m < n {
                    match &history.resampled_paths[m] {
                        Some(paths) => {
                            for path in paths {
                                f.increment(&ctx, &path[k], &path[k + 1], &mut inc);
                                for d in 0..dim {
                                    out[d] += inc[d] / n_particles as f64;
                                }
                            }
                        }
                        None => {
                            for (j, path) in history.paths[m].iter().enumerate() {
                                f.increment(&ctx, &path[k], &path[k + 1], &mut inc);
                                for d in 0..dim {
                                    out[d] += history.weights[m][j] * inc[d];
                                }
                            }
                        }
                    }
                } else {
                    for path in &history.paths[n] {
                        f.increment(&ctx, &path[k], &path[k + 1], &mut inc);
                        for d in 0..dim {
                            out[d] += inc[d] / n_particles as f64;
                        }
                    }
                }
            }
            out
        }
    }
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!(
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())),
        "{what}: {a} vs {b}"
    );
}
