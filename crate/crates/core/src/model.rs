//! Fitting, prediction, scoring and simulation of sparse dynamical models.
//!
//! Differential-form fits regress the first time derivative of every state
//! on the library. Weak-form libraries supply their own integrated targets,
//! and the two row spaces are never mixed. Trajectories are processed
//! independently, so no derivative stencil crosses from one trajectory into
//! the next, and their rows are stacked in input order.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::data::{array_to_matrix, matrix_to_array, AxisId, Dataset, TrajectoryCollection};
use crate::diff::{differentiate_dataset, DiffMethod};
use crate::ensemble::{fit_ensemble, EnsembleReport, EnsembleSpec};
use crate::error::{Error, Result};
use crate::integrate::{solve_ivp, OdeOptions};
use crate::library::{compile, evaluate, inputs_for, LibrarySpec};
use crate::optimize::{self, Coefficients, OptimizerSpec, Problem};

/// Simulation tolerances.
pub const SIM_RTOL: f64 = 1e-8;
pub const SIM_ATOL: f64 = 1e-10;
/// Simulation stops once the state norm exceeds this.
pub const SIM_MAX_NORM: f64 = 1e8;

/// Everything needed to fit a model besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sindy {
    pub library: LibrarySpec,
    /// Method for the time-derivative targets and, unless a library term
    /// overrides it, for derivative features.
    pub diff: DiffMethod,
    pub optimizer: OptimizerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSpec>,
    /// Scale library columns to unit norm inside the optimizer.
    #[serde(default)]
    pub normalize: bool,
}

impl Sindy {
    pub fn new(library: LibrarySpec, diff: DiffMethod, optimizer: OptimizerSpec) -> Self {
        Self {
            library,
            diff,
            optimizer,
            ensemble: None,
            normalize: false,
        }
    }

    pub fn with_ensemble(mut self, ensemble: EnsembleSpec) -> Self {
        self.ensemble = Some(ensemble);
        self
    }

    pub fn with_normalization(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn fit(&self, data: &TrajectoryCollection) -> Result<FittedModel> {
        let (n, r) = (data.n_states(), data.n_controls());
        self.library.validate(n + r)?;
        self.diff.validate(1)?;
        self.optimizer.validate()?;
        let (theta, targets, names) = regression_rows(&self.library, self.diff, data)?;
        let problem = Problem::new(theta, targets)?
            .with_names(names.clone())?
            .with_normalization(self.normalize);
        let (coefficients, ensemble) = match &self.ensemble {
            None => (optimize::solve(&problem, &self.optimizer)?, None),
            Some(spec) => {
                let report = fit_ensemble(&problem, &self.optimizer, spec)?;
                (report.aggregate.clone(), Some(report))
            }
        };
        Ok(FittedModel {
            coefficients,
            library: self.library.clone(),
            diff: self.diff,
            feature_names: names,
            target_names: target_names(n),
            n_states: n,
            n_controls: r,
            ensemble,
        })
    }
}

/// Fit with the given specs; see [`Sindy`] for normalization.
pub fn fit(
    data: &TrajectoryCollection,
    library: &LibrarySpec,
    diff: DiffMethod,
    optimizer: &OptimizerSpec,
    ensemble: Option<&EnsembleSpec>,
) -> Result<FittedModel> {
    let mut s = Sindy::new(library.clone(), diff, optimizer.clone());
    s.ensemble = ensemble.cloned();
    s.fit(data)
}

pub fn target_names(n_states: usize) -> Vec<String> {
    (0..n_states).map(|s| format!("q{s}_t")).collect()
}

/// Features and targets of one dataset with incomplete rows removed.
fn dataset_rows(library: &LibrarySpec, diff: DiffMethod, ds: &Dataset) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<String>)> {
    let fm = evaluate(library, ds, diff)?;
    let targets = match fm.weak_lhs {
        Some(lhs) => lhs,
        None => array_to_matrix(&differentiate_dataset(ds, diff, AxisId::Time, 1)?),
    };
    let theta = fm.values;
    let finite = |i: usize| {
        theta.row(i).iter().all(|v| v.is_finite()) && targets.row(i).iter().all(|v| v.is_finite())
    };
    let keep: Vec<usize> = (0..theta.nrows()).filter(|&i| finite(i)).collect();
    if keep.len() == theta.nrows() {
        return Ok((theta, targets, fm.names));
    }
    if !ds.allows_missing() {
        return Err(Error::NonFinite("targets or features".into()));
    }
    let pick = |m: &DMatrix<f64>| DMatrix::from_fn(keep.len(), m.ncols(), |i, j| m[(keep[i], j)]);
    Ok((pick(&theta), pick(&targets), fm.names))
}

/// Stacked regression rows of every trajectory, in collection order.
pub fn regression_rows(
    library: &LibrarySpec,
    diff: DiffMethod,
    data: &TrajectoryCollection,
) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<String>)> {
    let blocks = data
        .datasets()
        .iter()
        .map(|ds| dataset_rows(library, diff, ds))
        .collect::<Result<Vec<_>>>()?;
    let names = blocks[0].2.clone();
    let rows: usize = blocks.iter().map(|b| b.0.nrows()).sum();
    if rows == 0 {
        return Err(Error::Shape("no complete samples to fit".into()));
    }
    let (p, n) = (blocks[0].0.ncols(), blocks[0].1.ncols());
    let mut theta = DMatrix::zeros(rows, p);
    let mut targets = DMatrix::zeros(rows, n);
    let mut at = 0;
    for (t, y, _) in &blocks {
        theta.view_mut((at, 0), (t.nrows(), p)).copy_from(t);
        targets.view_mut((at, 0), (y.nrows(), n)).copy_from(y);
        at += t.nrows();
    }
    Ok((theta, targets, names))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub coefficients: Coefficients,
    pub library: LibrarySpec,
    pub diff: DiffMethod,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub n_states: usize,
    pub n_controls: usize,
    pub ensemble: Option<EnsembleReport>,
}

impl FittedModel {
    /// Rebuild a model from stored coefficients (features x targets).
    pub fn from_parts(
        library: LibrarySpec,
        diff: DiffMethod,
        xi: DMatrix<f64>,
        n_states: usize,
        n_controls: usize,
    ) -> Result<Self> {
        let names = crate::library::feature_names(&library, &inputs_for(n_states, n_controls))?;
        if xi.nrows() != names.len() || xi.ncols() != n_states {
            return Err(Error::Shape(format!(
                "coefficients are {} x {}, library and states need {} x {n_states}",
                xi.nrows(),
                xi.ncols(),
                names.len()
            )));
        }
        Ok(Self {
            coefficients: Coefficients::from_xi(xi, names.clone()),
            library,
            diff,
            feature_names: names,
            target_names: target_names(n_states),
            n_states,
            n_controls,
            ensemble: None,
        })
    }

    pub fn xi(&self) -> &DMatrix<f64> {
        &self.coefficients.xi
    }

    fn check(&self, data: &Dataset) -> Result<()> {
        if data.n_states() != self.n_states || data.n_controls() != self.n_controls {
            return Err(Error::Shape(format!(
                "model expects (n, r) = ({}, {}), dataset has ({}, {})",
                self.n_states,
                self.n_controls,
                data.n_states(),
                data.n_controls()
            )));
        }
        Ok(())
    }

    /// `Θ(data) Ξ` as a matrix: one row per sample (or weak subdomain).
    pub fn predict_matrix(&self, data: &Dataset) -> Result<DMatrix<f64>> {
        self.check(data)?;
        let fm = evaluate(&self.library, data, self.diff)?;
        Ok(fm.values * &self.coefficients.xi)
    }

    /// Predicted time derivatives in the dataset layout
    /// `(spatial..., time, n_states)`; weak models return `(subdomains, n_states)`.
    pub fn predict(&self, data: &Dataset) -> Result<ArrayD<f64>> {
        let mat = self.predict_matrix(data)?;
        self.to_layout(data, &mat)
    }

    /// Regression targets computed from the data, in the same layout as
    /// [`FittedModel::predict`].
    pub fn computed_targets(&self, data: &Dataset) -> Result<ArrayD<f64>> {
        let mat = self.target_matrix(data)?;
        self.to_layout(data, &mat)
    }

    fn target_matrix(&self, data: &Dataset) -> Result<DMatrix<f64>> {
        self.check(data)?;
        if self.library.is_weak() {
            let fm = evaluate(&self.library, data, self.diff)?;
            return Ok(fm.weak_lhs.expect("weak library yields targets"));
        }
        Ok(array_to_matrix(&differentiate_dataset(
            data,
            self.diff,
            AxisId::Time,
            1,
        )?))
    }

    fn to_layout(&self, data: &Dataset, mat: &DMatrix<f64>) -> Result<ArrayD<f64>> {
        if self.library.is_weak() {
            let mut out = ArrayD::zeros(IxDyn(&[mat.nrows(), mat.ncols()]));
            for ((i, j), v) in out.indexed_iter_mut().map(|(ix, v)| ((ix[0], ix[1]), v)) {
                *v = mat[(i, j)];
            }
            return Ok(out);
        }
        matrix_to_array(mat, &data.grid().shape())
    }

    /// Predicted and computed targets as matrices over the same rows.
    pub fn prediction_pairs(&self, data: &Dataset) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        Ok((self.predict_matrix(data)?, self.target_matrix(data)?))
    }

    pub fn score(&self, data: &Dataset, metric: Metric) -> Result<f64> {
        let (pred, truth) = self.prediction_pairs(data)?;
        metric.compute(&pred, &truth)
    }

    /// One equation per target, e.g. `q0_t = -0.98 q0 q0_x + -1.0 q0_xx`.
    pub fn equations(&self, precision: usize) -> Vec<String> {
        equations(&self.coefficients.xi, &self.feature_names, &self.target_names, precision)
    }

    /// Integrates `dq/dt = Θ(q, u) Ξ` with output at `t_eval`.
    pub fn simulate(&self, initial: &[f64], t_eval: &[f64], controls: Option<&ControlSignal>) -> Result<Simulation> {
        if self.library.has_derivatives() || self.library.is_weak() {
            return Err(Error::param("library", "simulation needs a library without derivative terms"));
        }
        if initial.len() != self.n_states {
            return Err(Error::Shape(format!(
                "initial state has {} entries, model has {} states",
                initial.len(),
                self.n_states
            )));
        }
        match (controls, self.n_controls) {
            (None, 0) => {}
            (Some(c), r) if c.values.ncols() == r && r > 0 => {}
            _ => {
                return Err(Error::Shape(format!(
                    "model needs {} control inputs",
                    self.n_controls
                )))
            }
        }
        let lib = compile(&self.library, &inputs_for(self.n_states, self.n_controls))?;
        let xi = &self.coefficients.xi;
        let n = self.n_states;
        let mut row = vec![0.0; n + self.n_controls];
        let mut failure: Option<Error> = None;
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
            row[..n].copy_from_slice(y);
            if let Some(c) = controls {
                c.interpolate_into(t, &mut row[n..]);
            }
            match lib.eval_row(&row) {
                Ok(theta) => {
                    for (j, d) in dy.iter_mut().enumerate() {
                        *d = theta.iter().zip(xi.column(j).iter()).map(|(a, b)| a * b).sum();
                    }
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    dy.fill(f64::NAN);
                }
            }
        };
        let opts = OdeOptions {
            rtol: SIM_RTOL,
            atol: SIM_ATOL,
            max_norm: SIM_MAX_NORM,
            ..Default::default()
        };
        let sol = solve_ivp(rhs, initial, t_eval, &opts)?;
        if let Some(e) = failure {
            return Err(e);
        }
        let mut states = DMatrix::zeros(sol.times.len(), n);
        for (i, s) in sol.states.iter().enumerate() {
            states.set_row(i, &DVector::from_column_slice(s).transpose());
        }
        if let Some(msg) = &sol.truncated {
            log::warn!("{msg}");
        }
        Ok(Simulation {
            times: sol.times,
            states,
            truncated: sol.truncated,
        })
    }
}

/// Piecewise-linear control input; constant beyond the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    times: Vec<f64>,
    values: DMatrix<f64>,
}

impl ControlSignal {
    pub fn new(times: Vec<f64>, values: DMatrix<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.nrows() {
            return Err(Error::Shape("one control row per time required".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Grid("control times must be strictly increasing".into()));
        }
        Ok(Self { times, values })
    }

    pub fn interpolate_into(&self, t: f64, out: &mut [f64]) {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 || k == self.times.len() {
            let i = if k == 0 { 0 } else { k - 1 };
            out.iter_mut().zip(self.values.row(i).iter()).for_each(|(o, v)| *o = *v);
            return;
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        for (j, o) in out.iter_mut().enumerate() {
            *o = (1.0 - w) * self.values[(k - 1, j)] + w * self.values[(k, j)];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    /// Times reached; shorter than requested when truncated.
    pub times: Vec<f64>,
    /// One row per time.
    pub states: DMatrix<f64>,
    pub truncated: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    R2,
    Rmse,
}

impl Metric {
    /// Pooled over every finite (prediction, truth) pair and every target.
    pub fn compute(self, pred: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
        if pred.shape() != truth.shape() {
            return Err(Error::Shape("prediction and truth differ in shape".into()));
        }
        let rows: Vec<usize> = (0..pred.nrows())
            .filter(|&i| {
                pred.row(i).iter().chain(truth.row(i).iter()).all(|v| v.is_finite())
            })
            .collect();
        if rows.is_empty() {
            return Err(Error::Metric("no finite samples".into()));
        }
        let ss_res: f64 = rows
            .iter()
            .flat_map(|&i| (0..pred.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| (pred[(i, j)] - truth[(i, j)]).powi(2))
            .sum();
        match self {
            Metric::Rmse => Ok((ss_res / (rows.len() * pred.ncols()) as f64).sqrt()),
            Metric::R2 => {
                let mut ss_tot = 0.0;
                for j in 0..truth.ncols() {
                    let mean = rows.iter().map(|&i| truth[(i, j)]).sum::<f64>() / rows.len() as f64;
                    ss_tot += rows.iter().map(|&i| (truth[(i, j)] - mean).powi(2)).sum::<f64>();
                }
                if ss_tot == 0.0 {
                    return Err(Error::Metric("r2 is undefined for constant targets".into()));
                }
                Ok(1.0 - ss_res / ss_tot)
            }
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::R2 => "r2",
            Metric::Rmse => "rmse",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r2" => Ok(Metric::R2),
            "rmse" => Ok(Metric::Rmse),
            _ => Err(Error::param("metric", format!("unknown metric `{s}`"))),
        }
    }
}

/// `v` rounded to `digits` significant digits, printed without exponent.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let digits = digits.max(1);
    let rounded: f64 = format!("{:.*e}", digits - 1, v).parse().expect("formatted float");
    let exp = rounded.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

/// Equation strings for a coefficient matrix; terms in column order, zero
/// coefficients omitted.
pub fn equations(xi: &DMatrix<f64>, features: &[String], targets: &[String], precision: usize) -> Vec<String> {
    targets
        .iter()
        .enumerate()
        .map(|(j, target)| {
            let terms: Vec<String> = (0..xi.nrows())
                .filter(|&i| xi[(i, j)] != 0.0)
                .map(|i| format!("{} {}", format_significant(xi[(i, j)], precision), features[i]))
                .collect();
            if terms.is_empty() {
                format!("{target} = 0")
            } else {
                format!("{target} = {}", terms.join(" + "))
            }
        })
        .collect()
}

/// Parses one line produced by [`equations`] into the target name and
/// `(coefficient, feature)` terms.
pub fn parse_equation(line: &str) -> Result<(String, Vec<(f64, String)>)> {
    let bad = || Error::Format(format!("cannot parse equation `{line}`"));
    let (target, rhs) = line.split_once(" = ").ok_or_else(bad)?;
    if rhs.trim() == "0" {
        return Ok((target.to_string(), Vec::new()));
    }
    let terms = rhs
        .split(" + ")
        .map(|t| {
            let (c, name) = t.split_once(' ').ok_or_else(bad)?;
            Ok((c.parse::<f64>().map_err(|_| bad())?, name.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((target.to_string(), terms))
}

/// Result of regressing one candidate library column on the others.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitFit {
    pub lhs: String,
    /// Coefficients over the full library; zero on the candidate column and
    /// on any excluded duplicates.
    pub coefficients: Coefficients,
    /// `‖Θ_j - Θ_{-j} ξ‖ / ‖Θ_j‖`.
    pub residual: f64,
    /// Columns identical to the candidate were excluded from its regression.
    pub degenerate: bool,
}

/// Relative distance under which two columns count as duplicates.
const DUPLICATE_TOL: f64 = 1e-12;

/// Tries each candidate as the left-hand side of `g(q, q_t, ...) = 0`;
/// results are sorted by ascending normalized residual.
pub fn fit_implicit(
    data: &TrajectoryCollection,
    library: &LibrarySpec,
    diff: DiffMethod,
    optimizer: &OptimizerSpec,
    candidates: &[&str],
    normalize: bool,
) -> Result<Vec<ImplicitFit>> {
    if library.is_weak() {
        return Err(Error::param("library", "implicit fits use the differential form"));
    }
    let (theta, _, names) = regression_rows(library, diff, data)?;
    fit_implicit_matrix(&theta, &names, optimizer, candidates, normalize)
}

/// [`fit_implicit`] on an already evaluated library.
pub fn fit_implicit_matrix(
    theta: &DMatrix<f64>,
    names: &[String],
    optimizer: &OptimizerSpec,
    candidates: &[&str],
    normalize: bool,
) -> Result<Vec<ImplicitFit>> {
    if names.len() != theta.ncols() {
        return Err(Error::Shape("one name per library column required".into()));
    }
    let mut out = Vec::with_capacity(candidates.len());
    for &cand in candidates {
        let j = names
            .iter()
            .position(|n| n == cand)
            .ok_or_else(|| Error::UnknownFeature(cand.to_string()))?;
        let lhs = theta.column(j).into_owned();
        let lhs_norm = lhs.norm();
        if lhs_norm == 0.0 {
            return Err(Error::param("candidate_lhs", format!("column `{cand}` is identically zero")));
        }
        let mut degenerate = false;
        let keep: Vec<usize> = (0..theta.ncols())
            .filter(|&k| {
                if k == j {
                    return false;
                }
                let dup = (theta.column(k) - &lhs).norm() <= DUPLICATE_TOL * lhs_norm;
                degenerate |= dup;
                !dup
            })
            .collect();
        let mut xi = DMatrix::zeros(theta.ncols(), 1);
        let mut diagnostics = Default::default();
        if !keep.is_empty() {
            let features = DMatrix::from_fn(theta.nrows(), keep.len(), |i, c| theta[(i, keep[c])]);
            let problem = Problem::new(features, DMatrix::from_column_slice(lhs.len(), 1, lhs.as_slice()))?
                .with_normalization(normalize);
            let c = optimize::solve(&problem, optimizer)?;
            for (k, &col) in keep.iter().enumerate() {
                xi[col] = c.xi[k];
            }
            diagnostics = c.diagnostics;
        }
        let residual = (&lhs - theta * &xi).norm() / lhs_norm;
        let mut coefficients = Coefficients::from_xi(xi, names.to_vec());
        coefficients.residuals = vec![residual * lhs_norm];
        coefficients.diagnostics = diagnostics;
        out.push(ImplicitFit {
            lhs: cand.to_string(),
            coefficients,
            residual,
            degenerate,
        });
    }
    out.sort_by(|a, b| a.residual.total_cmp(&b.residual));
    Ok(out)
}
