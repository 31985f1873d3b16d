//! Versioned JSON configuration files.
//!
//! A discovery config names exactly one data source, either a dataset on
//! disk or a benchmark to generate in memory:
//!
//! ```json
//! {
//!   "schema": 1,
//!   "benchmark": { "system": "lorenz" },
//!   "train_fraction": 0.6,
//!   "diff": { "method": "finite_difference", "order": 6 },
//!   "library": { "type": "polynomial", "degree": 2 },
//!   "optimizer": { "type": "stlsq", "threshold": 0.1 },
//!   "precision": 3
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use sindy_core::diff::DiffMethod;
use sindy_core::ensemble::EnsembleSpec;
use sindy_core::library::LibrarySpec;
use sindy_core::model::Metric;
use sindy_core::optimize::OptimizerSpec;
use sindy_core::systems::BenchmarkSpec;

use crate::error::{CliError, CliResult};

pub const SCHEMA: u32 = 1;

fn default_train_fraction() -> f64 {
    0.6
}

fn default_precision() -> usize {
    3
}

fn default_metric() -> String {
    "r2".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscoveryConfig {
    pub schema: u32,
    /// Dataset directory or CSV file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkSpec>,
    /// Leading fraction of time samples used for training; 1 trains on all.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub diff: DiffMethod,
    /// Required unless a benchmark supplies its canonical library.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub library: Option<LibrarySpec>,
    #[serde(default = "OptimizerSpec::stlsq")]
    pub optimizer: OptimizerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default = "default_metric")]
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Overrides the ensemble seed when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Significant digits in printed equations.
    #[serde(default = "default_precision")]
    pub precision: usize,
}

/// Spec file for `generate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub schema: u32,
    pub benchmark: BenchmarkSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Parse JSON, naming the offending field on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let mut path = e.path().to_string();
        if let Ok(doc) = serde_json::from_str::<Value>(text) {
            if let Some(key) = culprit::<T>(&doc, &path) {
                path = if path == "." { key } else { format!("{path}.{key}") };
            }
        }
        if path == "." || path == "?" {
            CliError::Config(format!("{what}: {}", e.inner()))
        } else {
            CliError::Config(format!("{what}: field `{path}`: {}", e.inner()))
        }
    })
}

/// Tagged enums buffer their content, so errors inside them only carry the
/// path of the enum itself. Find the member whose removal clears the error.
fn culprit<T: DeserializeOwned>(doc: &Value, path: &str) -> Option<String> {
    let pointer = if path == "." {
        String::new()
    } else {
        format!("/{}", path.replace('.', "/"))
    };
    let keys: Vec<String> = doc.pointer(&pointer)?.as_object()?.keys().cloned().collect();
    keys.into_iter().find(|k| {
        let mut trial = doc.clone();
        trial.pointer_mut(&pointer).and_then(Value::as_object_mut).map(|o| o.remove(k));
        match serde_path_to_error::deserialize::<_, T>(trial) {
            Ok(_) => true,
            Err(e) => e.path().to_string() != path,
        }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_json(&text, &path.display().to_string())
}

fn check_schema(schema: u32) -> CliResult<()> {
    if schema != SCHEMA {
        return Err(CliError::Config(format!(
            "field `schema`: unsupported version {schema}, expected {SCHEMA}"
        )));
    }
    Ok(())
}

impl GenerateConfig {
    pub fn validate(&self) -> CliResult<()> {
        check_schema(self.schema)?;
        self.benchmark.validate().map_err(CliError::config)
    }
}

impl DiscoveryConfig {
    /// Checks everything that does not need the data.
    pub fn validate(&self) -> CliResult<()> {
        check_schema(self.schema)?;
        match (&self.dataset, &self.benchmark) {
            (Some(_), None) => {}
            (None, Some(b)) => b.validate().map_err(CliError::config)?,
            _ => {
                return Err(CliError::Config(
                    "exactly one of `dataset` and `benchmark` is required".into(),
                ))
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(CliError::Config("field `train_fraction`: must be in (0, 1]".into()));
        }
        self.diff.validate(1).map_err(CliError::config)?;
        self.optimizer.validate().map_err(CliError::config)?;
        if self.library.is_none() && self.benchmark.is_none() {
            return Err(CliError::Config("field `library`: required with a dataset source".into()));
        }
        if let Some(e) = &self.ensemble {
            e.validate(usize::MAX).map_err(CliError::config)?;
        }
        self.metric()?;
        if self.precision == 0 {
            return Err(CliError::Config("field `precision`: must be >= 1".into()));
        }
        Ok(())
    }

    pub fn metric(&self) -> CliResult<Metric> {
        self.metric.parse().map_err(CliError::config)
    }

    pub fn library(&self) -> LibrarySpec {
        match (&self.library, &self.benchmark) {
            (Some(l), _) => l.clone(),
            (None, Some(b)) => b.library(),
            (None, None) => unreachable!("validated"),
        }
    }

    /// The ensemble spec with the config seed applied.
    pub fn ensemble(&self) -> Option<EnsembleSpec> {
        self.ensemble.clone().map(|mut e| {
            if let Some(s) = self.seed {
                e.seed = s;
            }
            e
        })
    }
}
