//! JSON documents written by the CLI. Floats are printed as the shortest
//! decimal that round-trips, so identical inputs give identical bytes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use sindy_core::diff::DiffMethod;
use sindy_core::ensemble::EnsembleReport;
use sindy_core::library::LibrarySpec;
use sindy_core::model::FittedModel;
use sindy_core::optimize::{Diagnostics, OptimizerSpec};

use crate::config::SCHEMA;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

/// What is needed to rebuild the fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub library: LibrarySpec,
    pub diff: DiffMethod,
    pub optimizer: OptimizerSpec,
    pub normalize: bool,
    pub n_states: usize,
    pub n_controls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub metric: String,
    pub train: Option<f64>,
    /// Absent when training used every sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_members: usize,
    pub n_failures: usize,
    pub inclusion_probability: Vec<Vec<f64>>,
    pub iqr: Vec<Vec<f64>>,
}

impl From<&EnsembleReport> for EnsembleSummary {
    fn from(r: &EnsembleReport) -> Self {
        Self {
            n_members: r.members.len(),
            n_failures: r.failures.len(),
            inclusion_probability: rows(&r.inclusion_probability),
            iqr: rows(&r.iqr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema: u32,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub model: ModelInfo,
    #[serde(default)]
    pub equations: Vec<String>,
    /// Rows are features, columns are targets.
    #[serde(default)]
    pub coefficients: Vec<Vec<f64>>,
    #[serde(default)]
    pub feature_names: Vec<String>,
    #[serde(default)]
    pub target_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<ScoreSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSummary>,
}

impl FitReport {
    pub fn success(model: &FittedModel, info: ModelInfo, precision: usize, score: ScoreSummary) -> Self {
        Self {
            schema: SCHEMA,
            status: Status::Ok,
            error: None,
            model: info,
            equations: model.equations(precision),
            coefficients: rows(model.xi()),
            feature_names: model.feature_names.clone(),
            target_names: model.target_names.clone(),
            score: Some(score),
            diagnostics: Some(model.coefficients.diagnostics.clone()),
            ensemble: model.ensemble.as_ref().map(EnsembleSummary::from),
        }
    }

    pub fn failure(info: ModelInfo, error: String) -> Self {
        Self {
            schema: SCHEMA,
            status: Status::Failed,
            error: Some(error),
            model: info,
            equations: Vec::new(),
            coefficients: Vec::new(),
            feature_names: Vec::new(),
            target_names: Vec::new(),
            score: None,
            diagnostics: None,
            ensemble: None,
        }
    }

    /// Rebuilds the model; the coefficients come back bit for bit.
    pub fn to_model(&self) -> CliResult<FittedModel> {
        if self.schema != SCHEMA {
            return Err(CliError::Config(format!("report schema {} is not {SCHEMA}", self.schema)));
        }
        if self.status != Status::Ok {
            return Err(CliError::Config("report describes a failed fit".into()));
        }
        let m = &self.model;
        let xi = matrix(&self.coefficients, m.n_states)?;
        let model = FittedModel::from_parts(m.library.clone(), m.diff, xi, m.n_states, m.n_controls)
            .map_err(CliError::config)?;
        if model.feature_names != self.feature_names {
            return Err(CliError::Config("report feature names do not match its library".into()));
        }
        Ok(model)
    }
}

/// Written by `score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub schema: u32,
    pub metric: String,
    pub value: f64,
    pub n_rows: usize,
}

/// Ground truth written next to a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthReport {
    pub schema: u32,
    pub library: LibrarySpec,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub coefficients: Vec<Vec<f64>>,
    pub equations: Vec<String>,
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>], n: usize) -> CliResult<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config(format!("every coefficient row must have {n} entries")));
    }
    Ok(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}
