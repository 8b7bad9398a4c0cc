//! Experiment configuration: JSON schema, validation and the canonical hash.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::asymptotics::classify;
use crate::distributions::TailDistribution;
use crate::error::{Error, Result};
use crate::estimate::default_grid;
use crate::model::{Dependence, Horizon, ModelSpec};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub run: RunConfig,
    pub output: OutputConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub f: TailDistribution,
    pub g: TailDistribution,
    #[serde(default)]
    pub dependence: Dependence,
    pub horizon: Horizon,
    /// Defaults to the index picked by the classifier.
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub samples: u64,
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    /// Paths per moment sweep behind the `B` and `C` coefficients.
    #[serde(default = "million")]
    pub moment_samples: u64,
    pub x_grid: GridSpec,
}

fn one() -> usize {
    1
}

fn million() -> u64 {
    1_000_000
}

/// Either explicit points or a log-spaced window between two one-period
/// tail levels.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Explicit(Vec<f64>),
    Window(GridWindow),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridWindow {
    pub points: usize,
    /// Smallest tail level, i.e. the right end of the grid.
    pub quantile_lo: f64,
    /// Largest tail level, i.e. the left end of the grid.
    pub quantile_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv_path: PathBuf,
    #[serde(default)]
    pub svg_path: Option<PathBuf>,
}

/// Knobs of the `verify` subcommand; every field has a default.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub tolerance: Option<f64>,
    /// Laws used by `c2`, `l2` and `pakes` instead of the model's.
    pub laws: Option<Vec<TailDistribution>>,
    pub eps: f64,
    pub n_max: usize,
    pub n_list: Vec<usize>,
    pub level: f64,
    pub potter_b: f64,
    pub potter_eps: f64,
    /// Number of largest grid points scored by `ratio`.
    pub score_last: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            tolerance: None,
            laws: None,
            eps: 0.05,
            n_max: 10,
            n_list: vec![5, 10, 20],
            level: 1e-6,
            potter_b: 1.1,
            potter_eps: 0.1,
            score_last: 3,
        }
    }
}

/// A parsed config with its canonical hash.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub sha256: String,
}

/// Sha256 of the compact JSON rendering with object keys sorted.
pub fn canonical_hash(value: &serde_json::Value) -> String {
    // serde_json's default map is ordered by key, so a round trip through
    // Value already sorts every object.
    let text = serde_json::to_string(value).expect("a Value always serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Config(format!("line {} column {}: {e}", e.line(), e.column()))
}

pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_error)?;
    let config: ExperimentConfig = serde_json::from_str(text).map_err(json_error)?;
    config.validate()?;
    Ok(LoadedConfig {
        sha256: canonical_hash(&value),
        config,
    })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.run.samples == 0 {
            return Err(Error::Config("run.samples must be positive".to_string()));
        }
        if self.run.workers == 0 {
            return Err(Error::Config("run.workers must be positive".to_string()));
        }
        match &self.run.x_grid {
            GridSpec::Explicit(xs) => {
                if xs.is_empty() || xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::Config(
                        "run.x_grid must be a nonempty ascending list of finite numbers".to_string(),
                    ));
                }
            }
            GridSpec::Window(w) => {
                if w.points < 2 || !(0.0 < w.quantile_lo && w.quantile_lo < w.quantile_hi && w.quantile_hi < 1.0) {
                    return Err(Error::Config(
                        "run.x_grid needs points >= 2 and 0 < quantile_lo < quantile_hi < 1".to_string(),
                    ));
                }
            }
        }
        if let Some(t) = self.verify.tolerance {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config("verify.tolerance must be nonnegative".to_string()));
            }
        }
        Ok(())
    }

    /// The model with the classifier's index when none is given. An
    /// uncertified pair is refused.
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let m = &self.model;
        let class = classify(&m.f, &m.g);
        if !class.certified() {
            return Err(Error::Uncertified(format!(
                "F = {:?}, G = {:?} is not a certified dominance case",
                m.f.law(),
                m.g.law()
            )));
        }
        let alpha = m.alpha.unwrap_or(class.effective_alpha);
        ModelSpec::new(m.f.clone(), m.g.clone(), m.dependence, m.horizon, alpha)
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        match &self.run.x_grid {
            GridSpec::Explicit(xs) => Ok(xs.clone()),
            GridSpec::Window(w) => default_grid(&self.model.f, &self.model.g, w.points, w.quantile_hi, w.quantile_lo),
        }
    }
}
