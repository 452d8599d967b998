use fixlag::config::degeneracy_profile;

use crate::io::{meta_path, out_file, write_json, FileConfig, Sidecar, SCHEMA_VERSION};
use crate::{CliError, CommonArgs};

/// Ancestral-collapse profile: the number of distinct time-0 ancestors of
/// the running cloud after each step, on a freshly simulated dataset.
pub fn run(common: &CommonArgs) -> Result<(), CliError> {
    let config = FileConfig::load(&common.config)?;
    let section = config
        .degeneracy
        .clone()
        .ok_or_else(|| CliError::Config("config section `degeneracy` is required".into()))?;
    let counts = degeneracy_profile(
        &config.model,
        section.n,
        section.n_particles,
        section.resampler,
        section.schedule,
        common.seed,
    )?;
    let path = out_file(&common.out, "degeneracy.csv")?;
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["k", "unique_ancestors"])?;
    for (k, c) in counts.iter().enumerate() {
        w.write_record(&[k.to_string(), c.to_string()])?;
    }
    w.flush().map_err(CliError::from)?;
    let meta = Sidecar {
        schema_version: SCHEMA_VERSION,
        command: "degeneracy",
        seed: common.seed,
        model: &config.model,
        extra: serde_json::json!({
            "n": section.n,
            "n_particles": section.n_particles,
            "resampler": section.resampler,
            "schedule": section.schedule,
            "collapsed": counts.last().map(|&c| c == 1),
        }),
    };
    write_json(&meta_path(&path), &meta)?;
    println!("wrote {} (final unique ancestors: {})", path.display(), counts.last().unwrap());
    Ok(())
}
