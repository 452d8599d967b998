//! Python bindings: model parameters, dataset simulation, smoothing,
//! Kalman ground truth and (SMC)EM.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fixlag::config::{
    degeneracy_profile, exact_statistics_config, mcem_config, simulate_config, smooth_config,
    McemConfig, ModelConfig, ThetaConfig,
};
use fixlag::em::McemTrace;
use fixlag::engine::{ResampleSchedule, Resampler};
use fixlag::kalman::kalman_filter;
use fixlag::models::SvProposal;
use fixlag::smoother::{EstimatorKind, SmootherConfig};
use fixlag::ssm::LagPolicy;

fn to_py_err(e: fixlag::Error) -> PyErr {
    match &e {
        fixlag::Error::InvalidParameter(_) | fixlag::Error::InvalidConfig(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Parameters of the noisily observed AR(1) model.
#[pyclass(name = "Ar1Params", skip_from_py_object)]
#[derive(Clone)]
struct PyAr1Params {
    #[pyo3(get)]
    a: f64,
    #[pyo3(get)]
    sigma_w: f64,
    #[pyo3(get)]
    sigma_v: f64,
}

#[pymethods]
impl PyAr1Params {
    #[new]
    fn new(a: f64, sigma_w: f64, sigma_v: f64) -> PyResult<Self> {
        fixlag::models::Ar1Params::new(a, sigma_w, sigma_v).map_err(to_py_err)?;
        Ok(Self { a, sigma_w, sigma_v })
    }

    fn __repr__(&self) -> String {
        format!("Ar1Params(a={}, sigma_w={}, sigma_v={})", self.a, self.sigma_w, self.sigma_v)
    }
}

/// Parameters of the stochastic volatility model.
#[pyclass(name = "SvParams", skip_from_py_object)]
#[derive(Clone)]
struct PySvParams {
    #[pyo3(get)]
    beta: f64,
    #[pyo3(get)]
    alpha: f64,
    #[pyo3(get)]
    sigma: f64,
    #[pyo3(get)]
    proposal: String,
}

#[pymethods]
impl PySvParams {
    #[new]
    #[pyo3(signature = (beta, alpha, sigma, proposal = "optimal".to_string()))]
    fn new(beta: f64, alpha: f64, sigma: f64, proposal: String) -> PyResult<Self> {
        fixlag::models::SvParams::new(beta, alpha, sigma).map_err(to_py_err)?;
        parse_proposal(&proposal)?;
        Ok(Self { beta, alpha, sigma, proposal })
    }

    fn __repr__(&self) -> String {
        format!(
            "SvParams(beta={}, alpha={}, sigma={}, proposal={:?})",
            self.beta, self.alpha, self.sigma, self.proposal
        )
    }
}

#[derive(FromPyObject)]
enum ParamsArg<'py> {
    Ar1(PyRef<'py, PyAr1Params>),
    Sv(PyRef<'py, PySvParams>),
}

fn parse_proposal(name: &str) -> PyResult<SvProposal> {
    match name {
        "bootstrap" => Ok(SvProposal::Bootstrap),
        "optimal" | "optimal_approx" => Ok(SvProposal::OptimalApprox),
        other => Err(PyValueError::new_err(format!("unknown proposal {other:?}"))),
    }
}

fn parse_estimator(name: &str) -> PyResult<EstimatorKind> {
    match name {
        "trajectory_weighted" => Ok(EstimatorKind::TrajectoryWeighted),
        "trajectory_resampled" => Ok(EstimatorKind::TrajectoryResampled),
        "fixed_lag_weighted" => Ok(EstimatorKind::FixedLagWeighted),
        "fixed_lag_resampled" => Ok(EstimatorKind::FixedLagResampled),
        other => Err(PyValueError::new_err(format!("unknown estimator {other:?}"))),
    }
}

fn parse_resampler(name: &str) -> PyResult<Resampler> {
    match name {
        "systematic" => Ok(Resampler::Systematic),
        "multinomial" => Ok(Resampler::Multinomial),
        other => Err(PyValueError::new_err(format!("unknown resampler {other:?}"))),
    }
}

fn model_config(params: &ParamsArg<'_>) -> PyResult<ModelConfig> {
    Ok(match params {
        ParamsArg::Ar1(p) => ModelConfig::Ar1 { a: p.a, sigma_w: p.sigma_w, sigma_v: p.sigma_v },
        ParamsArg::Sv(p) => ModelConfig::Sv {
            beta: p.beta,
            alpha: p.alpha,
            sigma: p.sigma,
            proposal: parse_proposal(&p.proposal)?,
        },
    })
}

fn lag_policy(lag: Option<usize>, lag_log_c: Option<f64>) -> PyResult<LagPolicy> {
    match (lag, lag_log_c) {
        (Some(d), None) => Ok(LagPolicy::Fixed(d)),
        (None, Some(c)) => Ok(LagPolicy::Logarithmic(c)),
        (None, None) => Ok(LagPolicy::Fixed(1)),
        (Some(_), Some(_)) => Err(PyValueError::new_err("pass either lag or lag_log_c, not both")),
    }
}

/// Simulate a dataset; returns (hidden states, observations).
#[pyfunction]
#[pyo3(signature = (params, n, seed = 0))]
fn simulate(params: ParamsArg<'_>, n: usize, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let model = model_config(&params)?;
    let (xs, ys) = simulate_config(&model, n, seed).map_err(to_py_err)?;
    Ok((xs.into_iter().map(|x| x[0]).collect(), ys))
}

/// Estimate the model's smoothed sufficient statistics over `ys`.
#[pyfunction]
#[pyo3(signature = (params, ys, particles, estimator = "fixed_lag_weighted".to_string(),
                    lag = None, lag_log_c = None, resampler = "systematic".to_string(),
                    ess_threshold = None, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn smooth(
    py: Python<'_>,
    params: ParamsArg<'_>,
    ys: Vec<f64>,
    particles: usize,
    estimator: String,
    lag: Option<usize>,
    lag_log_c: Option<f64>,
    resampler: String,
    ess_threshold: Option<f64>,
    seed: u64,
) -> PyResult<Py<PyDict>> {
    let model = model_config(&params)?;
    let config = SmootherConfig {
        n_particles: particles,
        kind: parse_estimator(&estimator)?,
        lag: lag_policy(lag, lag_log_c)?,
        resampler: parse_resampler(&resampler)?,
        schedule: match ess_threshold {
            Some(f) => ResampleSchedule::EssBelow(f),
            None => ResampleSchedule::EveryStep,
        },
    };
    let est = smooth_config(&model, &ys, &config, seed).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("value", est.value)?;
    out.set_item("kind", est.kind.name())?;
    out.set_item("n", est.n)?;
    out.set_item("particles", est.n_particles)?;
    out.set_item("lag", est.lag)?;
    Ok(out.into())
}

/// Exact smoothed sufficient statistics for the AR(1) model.
#[pyfunction]
fn kalman_exact_statistics(params: PyRef<'_, PyAr1Params>, ys: Vec<f64>) -> PyResult<Vec<f64>> {
    let model = ModelConfig::Ar1 { a: params.a, sigma_w: params.sigma_w, sigma_v: params.sigma_v };
    exact_statistics_config(&model, &ys)
        .map_err(to_py_err)?
        .ok_or_else(|| PyValueError::new_err("no exact smoother for this model"))
}

/// Exact log-likelihood of `ys` under the AR(1) model (diffuse prior).
#[pyfunction]
fn kalman_log_likelihood(params: PyRef<'_, PyAr1Params>, ys: Vec<f64>) -> PyResult<f64> {
    let p = fixlag::models::Ar1Params { a: params.a, sigma_w: params.sigma_w, sigma_v: params.sigma_v };
    Ok(kalman_filter(&p, &ys).map_err(to_py_err)?.log_likelihood())
}

/// Resolve the smoothing lag for horizon `n`.
#[pyfunction]
#[pyo3(signature = (n, fixed = None, logarithmic = None))]
fn resolve_lag(n: usize, fixed: Option<usize>, logarithmic: Option<f64>) -> PyResult<usize> {
    let policy = lag_policy(fixed, logarithmic)?;
    fixlag::ssm::resolve_lag(policy, n).map_err(to_py_err)
}

fn trace_to_dict(py: Python<'_>, trace: &McemTrace) -> PyResult<Py<PyDict>> {
    let out = PyDict::new(py);
    out.set_item("family", &trace.family)?;
    out.set_item("param_names", &trace.param_names)?;
    out.set_item("final", trace.final_params().map(|p| p.to_vec()))?;
    let iterations: Vec<Py<PyDict>> = trace
        .iterations
        .iter()
        .map(|it| {
            let d = PyDict::new(py);
            d.set_item("iteration", it.iteration)?;
            d.set_item("n_particles", it.n_particles)?;
            d.set_item("params", &it.params)?;
            d.set_item("stats", &it.stats)?;
            d.set_item("log_likelihood", it.log_likelihood)?;
            d.set_item("variance_floored", it.variance_floored)?;
            Ok(d.into())
        })
        .collect::<PyResult<_>>()?;
    out.set_item("iterations", iterations)?;
    Ok(out.into())
}

/// Run (SMC)EM over `ys` from the starting parameters.
#[pyfunction]
#[pyo3(signature = (params0, ys, iterations, warm_iterations, warm_particles, final_particles,
                    estimator = "fixed_lag_weighted".to_string(), lag = None, lag_log_c = None,
                    resampler = "systematic".to_string(), oracle = false, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn mcem(
    py: Python<'_>,
    params0: ParamsArg<'_>,
    ys: Vec<f64>,
    iterations: usize,
    warm_iterations: usize,
    warm_particles: usize,
    final_particles: usize,
    estimator: String,
    lag: Option<usize>,
    lag_log_c: Option<f64>,
    resampler: String,
    oracle: bool,
    seed: u64,
) -> PyResult<Py<PyDict>> {
    let model = model_config(&params0)?;
    let theta0 = match &params0 {
        ParamsArg::Ar1(p) => ThetaConfig::Ar1 { a: p.a, sigma_w: p.sigma_w, sigma_v: p.sigma_v },
        ParamsArg::Sv(p) => ThetaConfig::Sv { beta: p.beta, alpha: p.alpha, sigma: p.sigma },
    };
    let mcem_cfg = McemConfig {
        iterations,
        warm_iterations,
        warm_particles,
        final_particles,
        theta0,
        oracle,
    };
    let smoother = SmootherConfig {
        n_particles: warm_particles,
        kind: parse_estimator(&estimator)?,
        lag: lag_policy(lag, lag_log_c)?,
        resampler: parse_resampler(&resampler)?,
        schedule: ResampleSchedule::EveryStep,
    };
    let trace = mcem_config(&model, &ys, &mcem_cfg, &smoother, seed).map_err(to_py_err)?;
    trace_to_dict(py, &trace)
}

/// Unique time-0 ancestor counts per time step on a simulated dataset.
#[pyfunction]
#[pyo3(signature = (params, n, particles, resampler = "multinomial".to_string(), seed = 0))]
fn ancestral_collapse(
    params: ParamsArg<'_>,
    n: usize,
    particles: usize,
    resampler: String,
    seed: u64,
) -> PyResult<Vec<usize>> {
    let model = model_config(&params)?;
    degeneracy_profile(
        &model,
        n,
        particles,
        parse_resampler(&resampler)?,
        ResampleSchedule::EveryStep,
        seed,
    )
    .map_err(to_py_err)
}

#[pymodule]
fn fixlag_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAr1Params>()?;
    m.add_class::<PySvParams>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(smooth, m)?)?;
    m.add_function(wrap_pyfunction!(kalman_exact_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(kalman_log_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(resolve_lag, m)?)?;
    m.add_function(wrap_pyfunction!(mcem, m)?)?;
    m.add_function(wrap_pyfunction!(ancestral_collapse, m)?)?;
    Ok(())
}
