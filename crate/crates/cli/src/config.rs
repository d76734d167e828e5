//! Resolution of run parameters from flags and an optional JSON file.

use std::path::{Path, PathBuf};

use deinterleave::eval::{Method, WeightMode};
use deinterleave::search::DEFAULT_EXHAUSTIVE_CAP;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Every key a config file may set. Flags given on the command line win.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub gamma: Option<f64>,
    pub out: Option<PathBuf>,

    pub alphabet: Option<usize>,
    pub n: Option<usize>,
    pub k_cap: Option<usize>,
    pub l_cap: Option<usize>,

    pub input: Option<PathBuf>,
    pub partition: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub pdw: Option<bool>,

    pub epsilon: Option<f64>,
    pub min_points: Option<usize>,
    pub lsb: Option<f64>,

    pub method: Option<Method>,
    pub nb_iter: Option<usize>,
    pub alpha: Option<f64>,
    pub max_generations: Option<usize>,
    pub time_budget: Option<f64>,
    pub aspiration: Option<bool>,
    pub exhaustive_cap: Option<usize>,

    pub kind: Option<ExperimentKind>,
    pub alphabet_sizes: Option<Vec<usize>>,
    pub lengths: Option<Vec<usize>>,
    pub scenarios: Option<usize>,
    pub weight: Option<WeightMode>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    /// Exact-match rate of exhaustive search per alphabet size and length.
    Consistency,
    /// V-measure, time and evaluations of one method per scenario.
    Benchmark,
}

/// The fully resolved parameters of a run, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunConfig<P: Serialize> {
    pub command: &'static str,
    pub seed: u64,
    pub gamma: f64,
    pub out: PathBuf,
    #[serde(flatten)]
    pub params: P,
}

#[derive(Debug, Serialize)]
pub struct GenerateParams {
    pub alphabet: usize,
    pub n: usize,
    pub k_cap: Option<usize>,
    pub l_cap: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct IngestParams {
    pub input: PathBuf,
    pub epsilon: f64,
    pub min_points: usize,
    pub lsb: f64,
}

#[derive(Debug, Serialize)]
pub struct ScoreParams {
    pub input: PathBuf,
    pub partition: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct DeinterleaveParams {
    pub input: PathBuf,
    pub pdw: Option<IngestParams>,
    pub method: Method,
    pub truth: Option<PathBuf>,
    pub search: deinterleave::SearchConfig,
}

#[derive(Debug, Serialize)]
pub struct ExperimentParams {
    pub kind: ExperimentKind,
    pub alphabet_sizes: Vec<usize>,
    pub lengths: Vec<usize>,
    pub scenarios: usize,
    pub method: Method,
    pub weight: WeightMode,
    pub k_cap: Option<usize>,
    pub l_cap: Option<usize>,
    pub search: deinterleave::SearchConfig,
}

#[derive(Debug, Serialize)]
pub struct FsmCheckParams {
    pub model: PathBuf,
}

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_GAMMA: f64 = 0.0;
pub const DEFAULT_SCENARIOS: usize = 200;

pub fn default_exhaustive_cap() -> usize {
    DEFAULT_EXHAUSTIVE_CAP
}

pub fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing --{flag} (flag or config file)")))
}
