//! Config loading, dataset files and output sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fixlag::config::{McemConfig, ModelConfig};
use fixlag::engine::{ResampleSchedule, Resampler};
use fixlag::smoother::SmootherConfig;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// One JSON document configures every command; commands read the sections
/// they need and ignore the rest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub smoother: Option<SmootherConfig>,
    #[serde(default)]
    pub bench_lags: Option<BenchLagsSection>,
    #[serde(default)]
    pub bench_scaling: Option<BenchScalingSection>,
    #[serde(default)]
    pub mcem: Option<McemSection>,
    #[serde(default)]
    pub degeneracy: Option<DegeneracySection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchLagsSection {
    pub lags: Vec<usize>,
    pub replicates: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchScalingSection {
    pub particles: Vec<usize>,
    pub replicates: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McemSection {
    #[serde(flatten)]
    pub config: McemConfig,
    /// Number of independent EM runs (trace files).
    #[serde(default = "one")]
    pub seeds: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DegeneracySection {
    pub n_particles: usize,
    pub n: usize,
    #[serde(default = "default_resampler")]
    pub resampler: Resampler,
    #[serde(default)]
    pub schedule: ResampleSchedule,
}

fn one() -> usize {
    1
}

fn default_resampler() -> Resampler {
    Resampler::Multinomial
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
    }

    pub fn require_n(&self, cli_n: Option<usize>) -> Result<usize, CliError> {
        cli_n
            .or(self.n)
            .ok_or_else(|| CliError::Config("config field `n` is required".into()))
    }

    pub fn require_smoother(&self) -> Result<SmootherConfig, CliError> {
        self.smoother
            .ok_or_else(|| CliError::Config("config section `smoother` is required".into()))
    }
}

/// Create the output directory and return the path of a file inside it.
pub fn out_file(out: &Path, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))?;
    Ok(out.join(name))
}

/// Metadata sidecar written next to each output file.
#[derive(Serialize)]
pub struct Sidecar<'a, T: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub seed: u64,
    pub model: &'a ModelConfig,
    #[serde(flatten)]
    pub extra: T,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Dataset on disk: `dataset.csv` with columns `k,x,y` plus a
/// `dataset.meta.json` sidecar recording the generating model and seed.
pub struct Dataset {
    pub ys: Vec<f64>,
    pub model_kind: String,
}

pub fn write_dataset(
    csv_path: &Path,
    model: &ModelConfig,
    seed: u64,
    xs: &[Vec<f64>],
    ys: &[f64],
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(csv_path)?;
    w.write_record(["k", "x", "y"])?;
    for (k, (x, y)) in xs.iter().zip(ys).enumerate() {
        w.write_record(&[k.to_string(), x[0].to_string(), y.to_string()])?;
    }
    w.flush().map_err(CliError::from)?;
    let meta = Sidecar {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        seed,
        model,
        extra: serde_json::json!({ "n": ys.len() - 1 }),
    };
    write_json(&meta_path(csv_path), &meta)
}

pub fn meta_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

pub fn read_dataset(csv_path: &Path) -> Result<Dataset, CliError> {
    let mut r = csv::Reader::from_path(csv_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", csv_path.display())))?;
    let mut ys = Vec::new();
    for record in r.records() {
        let record = record?;
        record
            .get(1)
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| CliError::Config("dataset row missing x".into()))?;
        let y: f64 = record
            .get(2)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| CliError::Config("dataset row missing y".into()))?;
        ys.push(y);
    }
    if ys.is_empty() {
        return Err(CliError::Config("dataset is empty".into()));
    }
    let meta_file = meta_path(csv_path);
    let model_kind = fs::read_to_string(&meta_file)
        .ok()
        .and_then(|text| serde_json::from_str::<serde_json::Value>(&text).ok())
        .and_then(|v| v.get("model")?.get("kind")?.as_str().map(str::to_string))
        .ok_or_else(|| {
            CliError::Config(format!("missing or unreadable sidecar {}", meta_file.display()))
        })?;
    Ok(Dataset { ys, model_kind })
}

/// Reject a dataset generated under a different model kind.
pub fn check_model_kind(dataset: &Dataset, model: &ModelConfig) -> Result<(), CliError> {
    if dataset.model_kind != model.kind_name() {
        return Err(CliError::Config(format!(
            "dataset was generated by model `{}` but the config selects `{}`",
            dataset.model_kind,
            model.kind_name()
        )));
    }
    Ok(())
}

/// Format an optional cell; absent values become empty CSV cells.
pub fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
