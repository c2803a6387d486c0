//! Experiment configuration files.
//!
//! A config is a JSON object whose `experiment` field selects one of the
//! schemas below. Unknown fields are rejected, and every stochastic
//! experiment requires explicit seeds.

use std::path::{Path, PathBuf};

use nttkit::opt::RcgConfig;
use nttkit::quantum::ChannelSpec;
use nttkit::tt::TtRank;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> SchemaError {
    SchemaError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Output directory, overridden by `--out`.
    pub out: Option<PathBuf>,
    /// The config as read, echoed into the manifest.
    pub raw: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Experiment {
    Complete(Complete),
    Phase(Phase),
    EigenLaplace(EigenLaplace),
    EigenIsing(EigenIsing),
    Stabrank(Stabrank),
    Renyi(Renyi),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Complete(_) => "complete",
            Experiment::Phase(_) => "phase",
            Experiment::EigenLaplace(_) => "eigen-laplace",
            Experiment::EigenIsing(_) => "eigen-ising",
            Experiment::Stabrank(_) => "stabrank",
            Experiment::Renyi(_) => "renyi",
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        match self {
            Experiment::Complete(c) => c.seeds.clone(),
            Experiment::Phase(c) => vec![c.seed],
            Experiment::EigenLaplace(c) => c.seeds.clone(),
            Experiment::EigenIsing(c) => c.seeds.clone(),
            Experiment::Stabrank(c) => c.seeds.clone(),
            Experiment::Renyi(c) => vec![c.seed],
        }
    }
}

/// Completion runs: one per (noise level, seed).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Complete {
    pub shape: Vec<usize>,
    pub ranks: Vec<usize>,
    pub samples: usize,
    #[serde(default = "zero_noise")]
    pub noise: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_success_tol")]
    pub success_tol: f64,
    #[serde(default)]
    pub optimizer: RcgConfig,
}

/// Success-fraction grid over mode size and sample count.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub order: usize,
    pub rank: usize,
    pub sizes: Vec<usize>,
    pub samples: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_success_tol")]
    pub success_tol: f64,
    #[serde(default)]
    pub optimizer: RcgConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Min,
    Max,
}

/// Extreme eigenpair of the discrete Laplacian, one run per (rank, seed).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenLaplace {
    pub d: usize,
    pub n: usize,
    pub ranks: Vec<usize>,
    #[serde(default = "default_max")]
    pub which: Which,
    pub seeds: Vec<u64>,
    #[serde(default = "default_stage_iters")]
    pub stage_iters: usize,
    #[serde(default)]
    pub optimizer: RcgConfig,
}

/// Ising ground state; the run for rank `r` continues through every
/// listed rank up to `r`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenIsing {
    pub d: usize,
    pub t: f64,
    pub ranks: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_stage_iters")]
    pub stage_iters: usize,
    /// Single-site ALS sweeps for the baseline column; 0 disables it.
    #[serde(default)]
    pub als_sweeps: usize,
    #[serde(default)]
    pub optimizer: RcgConfig,
}

/// Approximate stabilizer-rank decomposition of `|H>^{⊗n}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stabrank {
    pub n: usize,
    pub terms: usize,
    pub rank: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_lambda_stages")]
    pub lambda_stages: usize,
    #[serde(default)]
    pub optimizer: RcgConfig,
}

/// Minimum output Rényi-2 entropy of `N^{⊗n}` for each listed `n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Renyi {
    pub channel: ChannelSpec,
    pub n: Vec<usize>,
    pub rank: usize,
    #[serde(default = "default_channel_restarts")]
    pub restarts: usize,
    pub seed: u64,
    /// Grid resolution of the single-site dense sweep.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Also write wall-clock times per iteration to `timings.csv`.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub optimizer: RcgConfig,
}

fn zero_noise() -> Vec<f64> {
    vec![0.0]
}
fn default_success_tol() -> f64 {
    1e-4
}
fn default_budget() -> usize {
    250
}
fn default_max() -> Which {
    Which::Max
}
fn default_stage_iters() -> usize {
    200
}
fn default_lambda() -> f64 {
    1.0
}
fn default_restarts() -> usize {
    100
}
fn default_lambda_stages() -> usize {
    2
}
fn default_channel_restarts() -> usize {
    5
}
fn default_resolution() -> usize {
    16
}

fn positive(field: &'static str, v: usize) -> Result<(), SchemaError> {
    if v == 0 {
        return Err(invalid(field, "must be positive"));
    }
    Ok(())
}

fn non_empty<T>(field: &'static str, v: &[T]) -> Result<(), SchemaError> {
    if v.is_empty() {
        return Err(invalid(field, "must not be empty"));
    }
    Ok(())
}

fn all_positive(field: &'static str, v: &[usize]) -> Result<(), SchemaError> {
    non_empty(field, v)?;
    if v.contains(&0) {
        return Err(invalid(field, "entries must be positive"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Read {
            path: path.into(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| SchemaError::Parse(e.to_string()))?;
        let mut body = raw.clone();
        let obj = body
            .as_object_mut()
            .ok_or_else(|| SchemaError::Parse("config must be a JSON object".into()))?;
        let out = match obj.remove("out") {
            None => None,
            Some(serde_json::Value::String(s)) => Some(PathBuf::from(s)),
            Some(_) => return Err(invalid("out", "must be a string")),
        };
        let experiment: Experiment =
            serde_json::from_value(body).map_err(|e| SchemaError::Parse(e.to_string()))?;
        let cfg = Self {
            experiment,
            out,
            raw,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that can be checked without running the experiment.
    pub fn validate(&self) -> Result<(), SchemaError> {
        let opt = |o: &RcgConfig| {
            o.validate()
                .map_err(|e| invalid("optimizer", e.to_string()))
        };
        match &self.experiment {
            Experiment::Complete(c) => {
                all_positive("shape", &c.shape)?;
                let ranks =
                    TtRank::new(c.ranks.clone()).map_err(|e| invalid("ranks", e.to_string()))?;
                ranks
                    .check_feasible(&c.shape)
                    .map_err(|e| invalid("ranks", e.to_string()))?;
                positive("samples", c.samples)?;
                non_empty("seeds", &c.seeds)?;
                non_empty("noise", &c.noise)?;
                if c.noise.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
                    return Err(invalid("noise", "levels must be finite and non-negative"));
                }
                opt(&c.optimizer)
            }
            Experiment::Phase(c) => {
                positive("order", c.order)?;
                if c.order < 2 {
                    return Err(invalid("order", "must be at least 2"));
                }
                positive("rank", c.rank)?;
                all_positive("sizes", &c.sizes)?;
                all_positive("samples", &c.samples)?;
                positive("trials", c.trials)?;
                positive("budget", c.budget)?;
                opt(&c.optimizer)
            }
            Experiment::EigenLaplace(c) => {
                positive("d", c.d)?;
                positive("n", c.n)?;
                all_positive("ranks", &c.ranks)?;
                non_empty("seeds", &c.seeds)?;
                opt(&c.optimizer)
            }
            Experiment::EigenIsing(c) => {
                if c.d < 2 {
                    return Err(invalid("d", "must be at least 2"));
                }
                all_positive("ranks", &c.ranks)?;
                non_empty("seeds", &c.seeds)?;
                if !c.t.is_finite() {
                    return Err(invalid("t", "must be finite"));
                }
                opt(&c.optimizer)
            }
            Experiment::Stabrank(c) => {
                positive("n", c.n)?;
                positive("terms", c.terms)?;
                positive("rank", c.rank)?;
                positive("restarts", c.restarts)?;
                non_empty("seeds", &c.seeds)?;
                if !(c.lambda >= 0.0 && c.lambda.is_finite()) {
                    return Err(invalid("lambda", "must be finite and non-negative"));
                }
                opt(&c.optimizer)
            }
            Experiment::Renyi(c) => {
                c.channel
                    .build()
                    .map_err(|e| invalid("channel", e.to_string()))?;
                all_positive("n", &c.n)?;
                positive("rank", c.rank)?;
                positive("restarts", c.restarts)?;
                if c.resolution < 2 {
                    return Err(invalid("resolution", "must be at least 2"));
                }
                opt(&c.optimizer)
            }
        }
    }
}
