use std::path::Path;

use rayon::prelude::*;

use fixlag::config::mcem_config;
use fixlag::em::McemTrace;
use fixlag::rng::derive_seed;

use crate::io::{cell, check_model_kind, meta_path, out_file, read_dataset, write_json, FileConfig, Sidecar, SCHEMA_VERSION};
use crate::{CliError, CommonArgs};

/// Run `seeds` independent EM estimations over one dataset; one trace CSV
/// per run plus a mean/std summary of the final parameter estimates.
pub fn run(common: &CommonArgs, dataset_path: &Path, seeds_override: Option<usize>) -> Result<(), CliError> {
    let config = FileConfig::load(&common.config)?;
    let section = config
        .mcem
        .clone()
        .ok_or_else(|| CliError::Config("config section `mcem` is required".into()))?;
    let seeds = seeds_override.unwrap_or(section.seeds).max(1);
    let smoother = config.require_smoother()?;
    let dataset = read_dataset(dataset_path)?;
    check_model_kind(&dataset, &config.model)?;

    let traces: Vec<McemTrace> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let seed = derive_seed(common.seed, s as u64);
            mcem_config(&config.model, &dataset.ys, &section.config, &smoother, seed)
        })
        .collect::<Result<_, _>>()?;

    let param_names = traces[0].param_names.clone();
    for (s, trace) in traces.iter().enumerate() {
        let path = out_file(&common.out, &format!("mcem_trace_{s}.csv"))?;
        let mut w = csv::Writer::from_path(&path)?;
        let mut header = vec!["iteration".to_string(), "n_particles".to_string()];
        header.extend(param_names.iter().cloned());
        header.extend(["s1", "s2", "s3", "s4"].map(str::to_string));
        header.extend(["log_likelihood", "variance_floored", "wall_time_s"].map(str::to_string));
        w.write_record(&header)?;
        for it in &trace.iterations {
            let mut row = vec![it.iteration.to_string(), cell(it.n_particles)];
            row.extend(it.params.iter().map(|p| p.to_string()));
            row.extend(it.stats.iter().map(|s| s.to_string()));
            row.push(cell(it.log_likelihood));
            row.push(it.variance_floored.to_string());
            row.push(it.wall_time_s.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(CliError::from)?;
    }

    // Table-style summary of the final estimates across runs.
    let finals: Vec<&[f64]> = traces.iter().map(|t| t.final_params().unwrap()).collect();
    let summary = out_file(&common.out, "mcem_summary.csv")?;
    let mut w = csv::Writer::from_path(&summary)?;
    w.write_record(["param", "mean", "std", "runs"])?;
    for (pi, name) in param_names.iter().enumerate() {
        let vals: Vec<f64> = finals.iter().map(|f| f[pi]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let std = if vals.len() > 1 {
            Some(
                (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64)
                    .sqrt(),
            )
        } else {
            None
        };
        w.write_record(&[name.clone(), mean.to_string(), cell(std), seeds.to_string()])?;
    }
    w.flush().map_err(CliError::from)?;

    let meta = Sidecar {
        schema_version: SCHEMA_VERSION,
        command: "mcem",
        seed: common.seed,
        model: &config.model,
        extra: serde_json::json!({
            "n": dataset.ys.len() - 1,
            "iterations": section.config.iterations,
            "oracle": section.config.oracle,
            "estimator": smoother.kind,
            "lag": smoother.lag,
            "seeds": seeds,
        }),
    };
    write_json(&meta_path(&summary), &meta)?;
    println!("wrote {} traces + {}", seeds, summary.display());
    Ok(())
}
