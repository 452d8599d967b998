//! Exact inference for the noisily observed AR(1) model: scalar Kalman
//! filter, RTS smoother with lag-one covariances, and the exact smoothed
//! sufficient statistics used as ground truth for the particle estimators.
//!
//! The diffuse prior is realized as the exact time-0 posterior
//! `N(y_0, sigma_v^2)`, so the time-0 log-likelihood increment is zero and
//! the reported likelihood is that of `y_{1:n}` given `y_0`. Zero noise
//! scales are tolerated through a tiny variance floor.

use crate::error::{Error, Result};
use crate::models::Ar1Params;
use crate::ssm::SufficientStatistics;

/// Floor applied to variances so degenerate (zero-noise) limits stay finite.
const VAR_FLOOR: f64 = 1e-12;

/// Exact Gaussian posterior moments for one observation record.
///
/// All vectors have length `n + 1` and are indexed by time; `predicted_*[0]`
/// is `NaN` (there is no time-0 prediction) and `lag_one_cov[k]` holds
/// `Cov(x_k, x_{k+1} | Y)` for `k < n`. The smoothed fields are empty until
/// [`kalman_smooth`] fills them.
#[derive(Clone, Debug, Default)]
pub struct GaussianPosterior {
    pub predicted_means: Vec<f64>,
    pub predicted_vars: Vec<f64>,
    pub filtered_means: Vec<f64>,
    pub filtered_vars: Vec<f64>,
    pub loglik_increments: Vec<f64>,
    pub smoothed_means: Vec<f64>,
    pub smoothed_vars: Vec<f64>,
    pub lag_one_covs: Vec<f64>,
    params: Ar1Params,
}

impl GaussianPosterior {
    pub fn horizon(&self) -> usize {
        self.filtered_means.len() - 1
    }

    pub fn is_smoothed(&self) -> bool {
        !self.smoothed_means.is_empty()
    }

    pub fn log_likelihood(&self) -> f64 {
        self.loglik_increments.iter().sum()
    }
}

fn validate(params: &Ar1Params) -> Result<()> {
    if !params.a.is_finite() || !params.sigma_w.is_finite() || !params.sigma_v.is_finite() {
        return Err(Error::InvalidParameter("AR(1) parameters must be finite".into()));
    }
    if params.sigma_w < 0.0 || params.sigma_v < 0.0 {
        return Err(Error::InvalidParameter("noise scales must be nonnegative".into()));
    }
    Ok(())
}

/// Run the filtering recursion over `y_{0:n}`.
pub fn kalman_filter(params: &Ar1Params, ys: &[f64]) -> Result<GaussianPosterior> {
    validate(params)?;
    if ys.is_empty() {
        return Err(Error::InvalidParameter("observation record is empty".into()));
    }
    let n = ys.len() - 1;
    let a = params.a;
    let qw = (params.sigma_w * params.sigma_w).max(0.0);
    let rv = (params.sigma_v * params.sigma_v).max(VAR_FLOOR);

    let mut post = GaussianPosterior {
        predicted_means: Vec::with_capacity(n + 1),
        predicted_vars: Vec::with_capacity(n + 1),
        filtered_means: Vec::with_capacity(n + 1),
        filtered_vars: Vec::with_capacity(n + 1),
        loglik_increments: Vec::with_capacity(n + 1),
        params: *params,
        ..Default::default()
    };

    post.predicted_means.push(f64::NAN);
    post.predicted_vars.push(f64::NAN);
    post.filtered_means.push(ys[0]);
    post.filtered_vars.push(rv);
    post.loglik_increments.push(0.0);

    for k in 1..=n {
        let m_pred = a * post.filtered_means[k - 1];
        let p_pred = (a * a * post.filtered_vars[k - 1] + qw).max(VAR_FLOOR);
        let s = p_pred + rv;
        let innov = ys[k] - m_pred;
        let gain = p_pred / s;
        post.predicted_means.push(m_pred);
        post.predicted_vars.push(p_pred);
        post.filtered_means.push(m_pred + gain * innov);
        post.filtered_vars.push(((1.0 - gain) * p_pred).max(VAR_FLOOR));
        post.loglik_increments
            .push(-0.5 * ((2.0 * std::f64::consts::PI * s).ln() + innov * innov / s));
    }
    Ok(post)
}

/// Backward RTS pass: smoothed moments and lag-one covariances
/// `C_{k,k+1|n} = J_k P_{k+1|n}` with `J_k` the smoother gain.
pub fn kalman_smooth(mut post: GaussianPosterior) -> GaussianPosterior {
    let n = post.horizon();
    let a = post.params.a;
    let mut ms = post.filtered_means.clone();
    let mut ps = post.filtered_vars.clone();
    let mut cov = vec![0.0; n];
    for k in (0..n).rev() {
        let j = post.filtered_vars[k] * a / post.predicted_vars[k + 1];
        ms[k] = post.filtered_means[k] + j * (ms[k + 1] - post.predicted_means[k + 1]);
        ps[k] = (post.filtered_vars[k] + j * j * (ps[k + 1] - post.predicted_vars[k + 1])).max(VAR_FLOOR);
        cov[k] = j * ps[k + 1];
    }
    post.smoothed_means = ms;
    post.smoothed_vars = ps;
    post.lag_one_covs = cov;
    post
}

/// Exact smoothed values of the four AR(1) sufficient statistics:
/// `E[x_k^2 | Y] = m^2 + P`, `E[x_k x_{k+1} | Y] = m_k m_{k+1} + C_{k,k+1}`,
/// `E[(y_k - x_k)^2 | Y] = (y_k - m_k)^2 + P_k`.
pub fn exact_statistics(post: &GaussianPosterior, ys: &[f64]) -> Result<SufficientStatistics> {
    if !post.is_smoothed() {
        return Err(Error::InvalidParameter("posterior must be smoothed first".into()));
    }
    let n = post.horizon();
    if ys.len() != n + 1 {
        return Err(Error::TimeMismatch { expected: n + 1, got: ys.len() });
    }
    let m = &post.smoothed_means;
    let p = &post.smoothed_vars;
    let c = &post.lag_one_covs;
    let s1: f64 = (1..n).map(|k| m[k] * m[k] + p[k]).sum();
    let s2: f64 = (0..n).map(|k| m[k] * m[k + 1] + c[k]).sum();
    let s3: f64 = (0..=n).map(|k| m[k] * m[k] + p[k]).sum();
    let s4: f64 = (0..=n).map(|k| (ys[k] - m[k]) * (ys[k] - m[k]) + p[k]).sum();
    Ok(vec![s1, s2, s3, s4])
}

/// Filter-then-smooth convenience.
pub fn kalman_posterior(params: &Ar1Params, ys: &[f64]) -> Result<GaussianPosterior> {
    Ok(kalman_smooth(kalman_filter(params, ys)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ar1_model, simulate};
    use crate::rng::RngContract;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn conjugate_mean_estimation() {
        // a=1, sigma_w=0: repeated observation of a fixed mean, so
        // P_{k|k} = sigma_v^2 / (k+1).
        let params = Ar1Params { a: 1.0, sigma_w: 0.0, sigma_v: 0.7 };
        let ys = vec![1.0; 6];
        let post = kalman_filter(&params, &ys).unwrap();
        for k in 0..=5 {
            close(post.filtered_vars[k], 0.49 / (k as f64 + 1.0), 1e-12);
        }
    }

    #[test]
    fn one_step_hand_recursion() {
        let params = Ar1Params { a: 0.8, sigma_w: 0.5, sigma_v: 1.0 };
        let post = kalman_filter(&params, &[1.0, 0.0]).unwrap();
        close(post.predicted_means[1], 0.8, 1e-12);
        close(post.predicted_vars[1], 0.89, 1e-12);
        close(post.filtered_means[1], 0.8 * (1.0 - 0.89 / 1.89), 1e-5);
        close(post.filtered_vars[1], 0.89 / 1.89, 1e-5);
    }

    #[test]
    fn uninformative_observation_limit() {
        // With a huge observation noise the update barely moves the filter
        // once the diffuse initial variance has contracted.
        let params = Ar1Params { a: 0.9, sigma_w: 0.3, sigma_v: 1e6 };
        let ys: Vec<f64> = (0..=80).map(|k| (k as f64 * 0.4).sin() * 2.0).collect();
        let post = kalman_filter(&params, &ys).unwrap();
        for k in 70..=80 {
            close(post.filtered_means[k], post.predicted_means[k], 1e-3);
        }
    }

    #[test]
    fn smoother_boundary_and_degenerate_cases() {
        let params = Ar1Params { a: 0.8, sigma_w: 0.5, sigma_v: 1.0 };
        let ys = vec![1.0, 0.3, -0.4, 0.9];
        let post = kalman_posterior(&params, &ys).unwrap();
        // k = n: smoothed equals filtered.
        close(post.smoothed_means[3], post.filtered_means[3], 1e-12);
        close(post.smoothed_vars[3], post.filtered_vars[3], 1e-12);
        // smoothing never increases the variance
        for k in 0..=3 {
            assert!(post.smoothed_vars[k] <= post.filtered_vars[k] + 1e-12);
        }
        // Cauchy-Schwarz on the lag-one covariance
        for k in 0..3 {
            assert!(
                post.lag_one_covs[k] * post.lag_one_covs[k]
                    <= post.smoothed_vars[k] * post.smoothed_vars[k + 1] + 1e-12
            );
        }

        // sigma_w = 0: smoothed means lie on one deterministic trajectory.
        let det = Ar1Params { a: 0.9, sigma_w: 0.0, sigma_v: 1.0 };
        let post = kalman_posterior(&det, &ys).unwrap();
        for k in 0..=3 {
            close(post.smoothed_means[k], post.smoothed_means[0] * 0.9f64.powi(k as i32), 1e-9);
        }
    }

    #[test]
    fn degenerate_limit_statistics_equal_path_sums() {
        // sigma_w = sigma_v = 0 with data the degenerate model explains: the
        // variance floor keeps the recursions finite and the posterior
        // collapses onto the observed deterministic path.
        let params = Ar1Params { a: 0.9, sigma_w: 0.0, sigma_v: 0.0 };
        let xs: Vec<f64> = (0..=20).map(|k| 2.0 * 0.9f64.powi(k)).collect();
        let post = kalman_posterior(&params, &xs).unwrap();
        let check = |stats: &[f64], xs: &[f64]| {
            let n = xs.len() - 1;
            let s1: f64 = (1..n).map(|k| xs[k] * xs[k]).sum();
            let s2: f64 = (0..n).map(|k| xs[k] * xs[k + 1]).sum();
            let s3: f64 = xs.iter().map(|x| x * x).sum();
            close(stats[0], s1, 1e-6);
            close(stats[1], s2, 1e-6);
            close(stats[2], s3, 1e-6);
            close(stats[3], 0.0, 1e-6);
        };
        check(&exact_statistics(&post, &xs).unwrap(), &xs);

        // sigma_v = 0 alone pins the posterior to the observed path even for
        // a noisy state trajectory.
        let model = ar1_model(Ar1Params::new(0.9, 0.4, 0.8).unwrap()).unwrap();
        let (xs, _) = simulate(&model, 30, &RngContract::new(13)).unwrap();
        let params = Ar1Params { a: 0.9, sigma_w: 0.4, sigma_v: 0.0 };
        let post = kalman_posterior(&params, &xs).unwrap();
        check(&exact_statistics(&post, &xs).unwrap(), &xs);
    }

    /// Discrete transfer-matrix integration of the joint posterior on a fine
    /// grid; an oracle that shares nothing with the Kalman recursions.
    fn grid_oracle(params: &Ar1Params, ys: &[f64], lo: f64, hi: f64, points: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = ys.len() - 1;
        let h = (hi - lo) / points as f64;
        let grid: Vec<f64> = (0..points).map(|i| lo + (i as f64 + 0.5) * h).collect();
        let gauss = |x: f64, mean: f64, sd: f64| {
            let z = (x - mean) / sd;
            (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
        };
        // forward pass: alpha_0 = g(x, y0) (diffuse prior), alpha_{k+1} = (alpha_k q) g
        let mut alphas = vec![vec![0.0; points]; n + 1];
        for (i, &x) in grid.iter().enumerate() {
            alphas[0][i] = gauss(ys[0], x, params.sigma_v);
        }
        for k in 0..n {
            for (j, &xj) in grid.iter().enumerate() {
                let mut acc = 0.0;
                for (i, &xi) in grid.iter().enumerate() {
                    acc += alphas[k][i] * gauss(xj, params.a * xi, params.sigma_w);
                }
                alphas[k + 1][j] = acc * gauss(ys[k + 1], xj, params.sigma_v) * h;
            }
        }
        // backward pass
        let mut betas = vec![vec![0.0; points]; n + 1];
        betas[n] = vec![1.0; points];
        for k in (0..n).rev() {
            for (i, &xi) in grid.iter().enumerate() {
                let mut acc = 0.0;
                for (j, &xj) in grid.iter().enumerate() {
                    acc += gauss(xj, params.a * xi, params.sigma_w)
                        * gauss(ys[k + 1], xj, params.sigma_v)
                        * betas[k + 1][j];
                }
                betas[k][i] = acc * h;
            }
        }
        let mut means = vec![0.0; n + 1];
        let mut vars = vec![0.0; n + 1];
        let mut covs = vec![0.0; n];
        for k in 0..=n {
            let mut z = 0.0;
            let mut m1 = 0.0;
            let mut m2 = 0.0;
            for (i, &x) in grid.iter().enumerate() {
                let p = alphas[k][i] * betas[k][i];
                z += p;
                m1 += p * x;
                m2 += p * x * x;
            }
            means[k] = m1 / z;
            vars[k] = m2 / z - means[k] * means[k];
        }
        for k in 0..n {
            let mut z = 0.0;
            let mut mxy = 0.0;
            for (i, &xi) in grid.iter().enumerate() {
                for (j, &xj) in grid.iter().enumerate() {
                    let p = alphas[k][i]
                        * gauss(xj, params.a * xi, params.sigma_w)
                        * gauss(ys[k + 1], xj, params.sigma_v)
                        * betas[k + 1][j];
                    z += p;
                    mxy += p * xi * xj;
                }
            }
            covs[k] = mxy / z - means[k] * means[k + 1];
        }
        (means, vars, covs)
    }

    #[test]
    fn grid_integration_oracle_n3() {
        let params = Ar1Params { a: 0.8, sigma_w: 0.5, sigma_v: 1.0 };
        let ys = vec![0.6, -0.2, 1.1, 0.4];
        let post = kalman_posterior(&params, &ys).unwrap();
        let (means, vars, covs) = grid_oracle(&params, &ys, -8.0, 8.0, 400);
        for k in 0..=3 {
            close(post.smoothed_means[k], means[k], 1e-4);
            close(post.smoothed_vars[k], vars[k], 1e-4);
        }
        for k in 0..3 {
            close(post.lag_one_covs[k], covs[k], 1e-4);
        }
        // statistics agree with the same oracle
        let stats = exact_statistics(&post, &ys).unwrap();
        let g1: f64 = (1..3).map(|k| means[k] * means[k] + vars[k]).sum();
        let g2: f64 = (0..3).map(|k| means[k] * means[k + 1] + covs[k]).sum();
        let g3: f64 = (0..=3).map(|k| means[k] * means[k] + vars[k]).sum();
        let g4: f64 = (0..=3).map(|k| (ys[k] - means[k]).powi(2) + vars[k]).sum();
        close(stats[0], g1, 1e-4);
        close(stats[1], g2, 1e-4);
        close(stats[2], g3, 1e-4);
        close(stats[3], g4, 1e-4);
    }

    #[test]
    fn likelihood_is_finite_and_reproducible() {
        let params = Ar1Params { a: 0.98, sigma_w: 0.2, sigma_v: 1.0 };
        let model = ar1_model(Ar1Params::new(0.98, 0.2, 1.0).unwrap()).unwrap();
        let (_, ys) = simulate(&model, 500, &RngContract::new(21)).unwrap();
        let l1 = kalman_filter(&params, &ys).unwrap().log_likelihood();
        let l2 = kalman_filter(&params, &ys).unwrap().log_likelihood();
        assert!(l1.is_finite());
        assert_eq!(l1, l2);
        assert_eq!(kalman_filter(&params, &ys).unwrap().loglik_increments[0], 0.0);
    }

    #[test]
    fn rejects_negative_scales() {
        assert!(kalman_filter(&Ar1Params { a: 0.5, sigma_w: -0.1, sigma_v: 1.0 }, &[0.0]).is_err());
    }
}
