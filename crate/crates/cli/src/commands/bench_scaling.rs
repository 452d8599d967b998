use rayon::prelude::*;

use fixlag::config::{exact_statistics_config, simulate_config, smooth_config};
use fixlag::rng::derive_seed;

use crate::io::{meta_path, out_file, write_json, FileConfig, Sidecar, SCHEMA_VERSION};
use crate::{CliError, CommonArgs};

const DATASET_SALT: u64 = 0xDA7A;

/// Replicate spread per particle count, plus the fitted log-log slope of the
/// replicate standard deviation against N.
pub fn run(common: &CommonArgs, replicates_override: Option<usize>) -> Result<(), CliError> {
    let config = FileConfig::load(&common.config)?;
    let section = config
        .bench_scaling
        .clone()
        .ok_or_else(|| CliError::Config("config section `bench_scaling` is required".into()))?;
    let replicates = replicates_override.unwrap_or(section.replicates);
    if section.particles.len() < 2 {
        return Err(CliError::Config("bench_scaling needs at least two particle counts".into()));
    }
    if replicates < 2 {
        return Err(CliError::Config("bench_scaling needs at least two replicates".into()));
    }
    let smoother = config.require_smoother()?;
    let n = config.require_n(None)?;

    let (_, ys) = simulate_config(&config.model, n, derive_seed(common.seed, DATASET_SALT))?;
    let exact = exact_statistics_config(&config.model, &ys)?;
    let exact_s1 = exact.map(|ex| ex[0] / n as f64);

    let path = out_file(&common.out, "bench_scaling.csv")?;
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["n_particles", "replicates", "mean_s1_over_n", "std_s1_over_n"])?;

    let mut log_points = Vec::with_capacity(section.particles.len());
    for (pi, &n_particles) in section.particles.iter().enumerate() {
        let vals: Vec<f64> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let cfg = fixlag::smoother::SmootherConfig { n_particles, ..smoother };
                let seed = derive_seed(common.seed, (pi as u64) << 32 | r as u64);
                smooth_config(&config.model, &ys, &cfg, seed).map(|est| est.value[0] / n as f64)
            })
            .collect::<Result<_, _>>()?;
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let std = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (vals.len() - 1) as f64)
            .sqrt();
        w.write_record(&[
            n_particles.to_string(),
            replicates.to_string(),
            mean.to_string(),
            std.to_string(),
        ])?;
        log_points.push(((n_particles as f64).ln(), std.ln()));
    }
    w.flush().map_err(CliError::from)?;

    // Least-squares slope of ln(std) on ln(N); -0.5 under root-N scaling.
    let mx = log_points.iter().map(|p| p.0).sum::<f64>() / log_points.len() as f64;
    let my = log_points.iter().map(|p| p.1).sum::<f64>() / log_points.len() as f64;
    let sxx: f64 = log_points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = log_points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;

    let meta = Sidecar {
        schema_version: SCHEMA_VERSION,
        command: "bench-scaling",
        seed: common.seed,
        model: &config.model,
        extra: serde_json::json!({
            "n": n,
            "estimator": smoother.kind,
            "lag": smoother.lag,
            "particles": section.particles,
            "replicates": replicates,
            "fitted_slope": slope,
            "exact_s1_over_n": exact_s1,
        }),
    };
    write_json(&meta_path(&path), &meta)?;
    println!("wrote {} (fitted slope {slope:.3})", path.display());
    Ok(())
}
