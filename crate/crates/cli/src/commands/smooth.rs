use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use fixlag::config::{exact_statistics_config, smooth_config, ModelConfig};
use fixlag::smoother::EstimatorKind;

use crate::io::{check_model_kind, out_file, read_dataset, write_json, FileConfig, SCHEMA_VERSION};
use crate::{CliError, CommonArgs};

#[derive(Serialize)]
struct SmoothRecord<'a> {
    schema_version: u32,
    command: &'static str,
    model: &'a ModelConfig,
    estimator: EstimatorKind,
    n: usize,
    n_particles: usize,
    lag: Option<usize>,
    seed: u64,
    estimate: Vec<f64>,
    estimate_s1_over_n: f64,
    /// Kalman ground truth; present for the AR(1) model only.
    exact: Option<Vec<f64>>,
    exact_s1_over_n: Option<f64>,
    abs_error: Option<Vec<f64>>,
    wall_time_s: f64,
}

pub fn run(common: &CommonArgs, dataset_path: &Path, particles: Option<usize>) -> Result<(), CliError> {
    let config = FileConfig::load(&common.config)?;
    let mut smoother = config.require_smoother()?;
    if let Some(p) = particles {
        smoother.n_particles = p;
    }
    let dataset = read_dataset(dataset_path)?;
    check_model_kind(&dataset, &config.model)?;
    let n = dataset.ys.len() - 1;

    let started = Instant::now();
    let estimate = smooth_config(&config.model, &dataset.ys, &smoother, common.seed)?;
    let wall_time_s = started.elapsed().as_secs_f64();

    let exact = exact_statistics_config(&config.model, &dataset.ys)?;
    let abs_error = exact.as_ref().map(|ex| {
        estimate.value.iter().zip(ex).map(|(a, b)| (a - b).abs()).collect::<Vec<f64>>()
    });
    let record = SmoothRecord {
        schema_version: SCHEMA_VERSION,
        command: "smooth",
        model: &config.model,
        estimator: estimate.kind,
        n,
        n_particles: estimate.n_particles,
        lag: estimate.lag,
        seed: common.seed,
        estimate_s1_over_n: estimate.value[0] / n as f64,
        exact_s1_over_n: exact.as_ref().map(|ex| ex[0] / n as f64),
        estimate: estimate.value,
        exact,
        abs_error,
        wall_time_s,
    };
    let path = out_file(&common.out, "smooth.json")?;
    write_json(&path, &record)?;
    println!("wrote {}", path.display());
    Ok(())
}
