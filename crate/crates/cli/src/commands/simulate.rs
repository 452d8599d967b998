use fixlag::config::simulate_config;

use crate::io::{out_file, write_dataset, FileConfig};
use crate::{CliError, CommonArgs};

pub fn run(common: &CommonArgs, n_override: Option<usize>) -> Result<(), CliError> {
    let config = FileConfig::load(&common.config)?;
    let n = config.require_n(n_override)?;
    let (xs, ys) = simulate_config(&config.model, n, common.seed)?;
    let path = out_file(&common.out, "dataset.csv")?;
    write_dataset(&path, &config.model, common.seed, &xs, &ys)?;
    println!("wrote {} ({} rows)", path.display(), ys.len());
    Ok(())
}
