use rayon::prelude::*;

use fixlag::config::{exact_statistics_config, simulate_config, smooth_config};
use fixlag::rng::derive_seed;
use fixlag::ssm::LagPolicy;

use crate::io::{cell, meta_path, out_file, write_json, FileConfig, Sidecar, SCHEMA_VERSION};
use crate::{CliError, CommonArgs};

const DATASET_SALT: u64 = 0xDA7A;

/// One boxplot-style sweep: replicate estimates of S1/n per lag, with
/// bias/std/MSE summary rows against the Kalman truth where it exists.
pub fn run(common: &CommonArgs, replicates_override: Option<usize>) -> Result<(), CliError> {
    let config = FileConfig::load(&common.config)?;
    let section = config
        .bench_lags
        .clone()
        .ok_or_else(|| CliError::Config("config section `bench_lags` is required".into()))?;
    let replicates = replicates_override.unwrap_or(section.replicates);
    if section.lags.is_empty() || replicates == 0 {
        return Err(CliError::Config("bench_lags needs at least one lag and one replicate".into()));
    }
    let smoother = config.require_smoother()?;
    let n = config.require_n(None)?;

    let (_, ys) = simulate_config(&config.model, n, derive_seed(common.seed, DATASET_SALT))?;
    let exact = exact_statistics_config(&config.model, &ys)?;
    let exact_s1 = exact.map(|ex| ex[0] / n as f64);

    // Independent particle seeds per (lag, replicate); rows come back in
    // deterministic (lag, replicate) order regardless of scheduling.
    let jobs: Vec<(usize, usize)> = section
        .lags
        .iter()
        .enumerate()
        .flat_map(|(li, _)| (0..replicates).map(move |r| (li, r)))
        .collect();
    let estimates: Vec<f64> = jobs
        .par_iter()
        .map(|&(li, r)| {
            let cfg = fixlag::smoother::SmootherConfig {
                lag: LagPolicy::Fixed(section.lags[li]),
                ..smoother
            };
            let seed = derive_seed(common.seed, (li as u64) << 32 | r as u64);
            smooth_config(&config.model, &ys, &cfg, seed).map(|est| est.value[0] / n as f64)
        })
        .collect::<Result<_, _>>()?;

    let path = out_file(&common.out, "bench_lags.csv")?;
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "row_type",
        "lag",
        "replicate",
        "estimate_s1_over_n",
        "exact_s1_over_n",
        "abs_error",
        "bias",
        "std",
        "mse",
    ])?;
    for (&(li, r), est) in jobs.iter().zip(&estimates) {
        w.write_record(&[
            "replicate".to_string(),
            section.lags[li].to_string(),
            r.to_string(),
            est.to_string(),
            cell(exact_s1),
            cell(exact_s1.map(|ex| (est - ex).abs())),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    for (li, &lag) in section.lags.iter().enumerate() {
        let vals: Vec<f64> = jobs
            .iter()
            .zip(&estimates)
            .filter(|((l, _), _)| *l == li)
            .map(|(_, e)| *e)
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let std = if vals.len() > 1 {
            Some(
                (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64)
                    .sqrt(),
            )
        } else {
            None
        };
        let bias = exact_s1.map(|ex| mean - ex);
        let mse = exact_s1
            .map(|ex| vals.iter().map(|v| (v - ex) * (v - ex)).sum::<f64>() / vals.len() as f64);
        w.write_record(&[
            "summary".to_string(),
            lag.to_string(),
            String::new(),
            mean.to_string(),
            cell(exact_s1),
            String::new(),
            cell(bias),
            cell(std),
            cell(mse),
        ])?;
    }
    w.flush().map_err(CliError::from)?;

    let meta = Sidecar {
        schema_version: SCHEMA_VERSION,
        command: "bench-lags",
        seed: common.seed,
        model: &config.model,
        extra: serde_json::json!({
            "n": n,
            "n_particles": smoother.n_particles,
            "estimator": smoother.kind,
            "lags": section.lags,
            "replicates": replicates,
            "exact_s1_over_n": exact_s1,
        }),
    };
    write_json(&meta_path(&path), &meta)?;
    println!("wrote {} ({} replicate rows + {} summaries)", path.display(), jobs.len(), section.lags.len());
    Ok(())
}
