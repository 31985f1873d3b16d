//! Sparse regression: `argmin_Ξ ‖Y - Θ Ξ‖² + R(Ξ)`.
//!
//! All optimizers share [`Problem`] and return [`Coefficients`]. Before any
//! solver runs, rows are weighted, all-zero columns are dropped, columns are
//! optionally scaled to unit norm, and tall problems are compressed with a
//! thin QR factorization. Least squares on any column subset of the
//! compressed system has the same minimizer as on the original rows.

mod greedy;
mod lstsq;
mod sr3;
mod stlsq;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use sr3::{hard_threshold, soft_threshold};

/// Default hyperparameters.
pub const STLSQ_THRESHOLD: f64 = 0.1;
pub const STLSQ_ALPHA: f64 = 0.05;
pub const STLSQ_MAX_ITER: usize = 20;
pub const SR3_NU: f64 = 1.0;
pub const SR3_TOL: f64 = 1e-5;
pub const SR3_MAX_ITER: usize = 30;
pub const FROLS_ERR_TOL: f64 = 1e-6;
/// Fraction of rows held out by the SSR holdout rule.
pub const HOLDOUT_FRACTION: f64 = 0.25;
/// Sparsest path model whose residual is within this relative margin of
/// the best one is selected.
pub const PARSIMONY_MARGIN: f64 = 0.05;

/// A sparse regression problem `targets ≈ theta · Ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    theta: DMatrix<f64>,
    targets: DMatrix<f64>,
    names: Vec<String>,
    weights: Option<DVector<f64>>,
    normalize: bool,
}

impl Problem {
    pub fn new(theta: DMatrix<f64>, targets: DMatrix<f64>) -> Result<Self> {
        let (m, p) = theta.shape();
        if m == 0 || p == 0 {
            return Err(Error::Shape(format!("feature matrix is {m} x {p}")));
        }
        if targets.nrows() != m {
            return Err(Error::Shape(format!(
                "feature matrix has {m} rows but targets have {}",
                targets.nrows()
            )));
        }
        if targets.ncols() == 0 {
            return Err(Error::Shape("no targets".into()));
        }
        if theta.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("regression problem".into()));
        }
        Ok(Self {
            names: (0..p).map(|i| format!("f{i}")).collect(),
            theta,
            targets,
            weights: None,
            normalize: false,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.theta.ncols() {
            return Err(Error::Shape(format!(
                "{} names for {} features",
                names.len(),
                self.theta.ncols()
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn with_weights(mut self, weights: DVector<f64>) -> Result<Self> {
        if weights.len() != self.theta.nrows() {
            return Err(Error::Shape("one weight per row required".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::param("weights", "must be finite and >= 0"));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    /// Scale columns to unit 2-norm before solving; coefficients are mapped back.
    pub fn with_normalization(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn normalize(&self) -> bool {
        self.normalize
    }

    pub fn n_samples(&self) -> usize {
        self.theta.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.theta.ncols()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.ncols()
    }

    /// Sub-problem on the given rows (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let pick = |m: &DMatrix<f64>| DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)]);
        let mut out = Problem::new(pick(&self.theta), pick(&self.targets))?;
        out.names = self.names.clone();
        out.normalize = self.normalize;
        out.weights = self
            .weights
            .as_ref()
            .map(|w| DVector::from_iterator(rows.len(), rows.iter().map(|&r| w[r])));
        Ok(out)
    }

    /// Sub-problem with `columns` only, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        let theta = DMatrix::from_fn(self.theta.nrows(), columns.len(), |i, j| self.theta[(i, columns[j])]);
        let mut out = Problem::new(theta, self.targets.clone())?;
        out.names = columns.iter().map(|&c| self.names[c].clone()).collect();
        out.normalize = self.normalize;
        out.weights = self.weights.clone();
        Ok(out)
    }

    fn weighted(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        match &self.weights {
            None => (self.theta.clone(), self.targets.clone()),
            Some(w) => {
                let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
                let theta = DMatrix::from_fn(self.theta.nrows(), self.theta.ncols(), |i, j| {
                    self.theta[(i, j)] * sw[i]
                });
                let targets = DMatrix::from_fn(self.targets.nrows(), self.targets.ncols(), |i, j| {
                    self.targets[(i, j)] * sw[i]
                });
                (theta, targets)
            }
        }
    }

    /// Per-target 2-norm of `targets - theta · xi` (row weights applied).
    pub fn residual_norms(&self, xi: &DMatrix<f64>) -> Vec<f64> {
        let (theta, targets) = self.weighted();
        let r = targets - theta * xi;
        r.column_iter().map(|c| c.norm()).collect()
    }
}

/// Solver-independent view of a prepared problem.
pub(crate) struct Prepared {
    /// Compressed (or original) design restricted to kept columns, scaled.
    pub r: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Squared norm of each weighted target over all rows.
    pub yy: Vec<f64>,
    /// Original indices of the kept columns.
    pub kept: Vec<usize>,
    /// Divide solved coefficients by these to undo normalization.
    pub scale: Vec<f64>,
    /// 2-norm of each kept (scaled) column.
    pub col_norms: Vec<f64>,
    pub n_features: usize,
}

impl Prepared {
    pub fn new(problem: &Problem) -> Self {
        let (theta, targets) = problem.weighted();
        let norms: Vec<f64> = theta.column_iter().map(|c| c.norm()).collect();
        let kept: Vec<usize> = (0..theta.ncols()).filter(|&j| norms[j] > 0.0).collect();
        let scale: Vec<f64> = kept
            .iter()
            .map(|&j| if problem.normalize { norms[j] } else { 1.0 })
            .collect();
        let m = theta.nrows();
        let design = DMatrix::from_fn(m, kept.len(), |i, j| theta[(i, kept[j])] / scale[j]);
        let yy = targets.column_iter().map(|c| c.norm_squared()).collect();
        let col_norms = design.column_iter().map(|c| c.norm()).collect();
        let pk = kept.len();
        let (r, b) = if m > pk && pk > 0 {
            let qr = design.qr();
            let mut qty = targets;
            qr.q_tr_mul(&mut qty);
            (qr.r(), qty.rows(0, pk).into_owned())
        } else {
            (design, targets)
        };
        Self {
            r,
            b,
            yy,
            kept,
            scale,
            col_norms,
            n_features: problem.n_features(),
        }
    }

    pub fn n_kept(&self) -> usize {
        self.kept.len()
    }

    pub fn n_targets(&self) -> usize {
        self.b.ncols()
    }

    /// Least squares of target `j` on the kept-column subset `active`
    /// (indices into the kept columns).
    pub fn fit_subset(&self, active: &[usize], j: usize, ridge: f64) -> (Vec<f64>, bool) {
        let a = DMatrix::from_fn(self.r.nrows(), active.len(), |i, c| self.r[(i, active[c])]);
        let y = self.b.column(j).into_owned();
        let s = lstsq::lstsq(&a, &DMatrix::from_column_slice(y.len(), 1, y.as_slice()), ridge);
        (s.x.column(0).iter().copied().collect(), s.rank_deficient)
    }

    /// ‖R x - b_j‖ in compressed space (differs from the true residual by a
    /// constant orthogonal component).
    pub fn compressed_residual(&self, xi: &[f64], j: usize) -> f64 {
        let x = DVector::from_column_slice(xi);
        (&self.r * x - self.b.column(j)).norm()
    }

    /// Residual norm over all rows for a subset fit of target `j`.
    pub fn true_residual(&self, active: &[usize], coef: &[f64], j: usize) -> f64 {
        let mut x = vec![0.0; self.n_kept()];
        for (&i, &v) in active.iter().zip(coef) {
            x[i] = v;
        }
        let rc = self.compressed_residual(&x, j);
        let bb = self.b.column(j).norm_squared();
        (rc * rc + (self.yy[j] - bb).max(0.0)).sqrt()
    }

    /// Map kept-column coefficients (kept x n) back to the full feature set.
    pub fn scatter(&self, xi: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_features, xi.ncols());
        for (k, &orig) in self.kept.iter().enumerate() {
            for j in 0..xi.ncols() {
                out[(orig, j)] = xi[(k, j)] / self.scale[k];
            }
        }
        out
    }

    pub fn dropped(&self) -> Vec<usize> {
        (0..self.n_features).filter(|j| !self.kept.contains(j)).collect()
    }
}

/// Solver diagnostics carried alongside the coefficients.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub converged: bool,
    pub iterations: usize,
    /// A least-squares solve hit a rank-deficient system; the minimum-norm
    /// solution was used.
    pub rank_deficient: bool,
    /// Identically zero feature columns excluded from the fit.
    pub dropped_columns: Vec<usize>,
    /// Targets whose support became empty.
    pub empty_targets: Vec<usize>,
    pub messages: Vec<String>,
}

/// Identified sparse coefficient matrix Ξ (features x targets).
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub xi: DMatrix<f64>,
    pub support: DMatrix<bool>,
    pub names: Vec<String>,
    /// Per-target training residual norm.
    pub residuals: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl Coefficients {
    /// Build from a coefficient matrix; support is its nonzero pattern.
    pub fn from_xi(xi: DMatrix<f64>, names: Vec<String>) -> Self {
        let support = xi.map(|v| v != 0.0);
        let n = xi.ncols();
        Self {
            xi,
            support,
            names,
            residuals: vec![0.0; n],
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn zeros(p: usize, n: usize, names: Vec<String>) -> Self {
        Self::from_xi(DMatrix::zeros(p, n), names)
    }

    pub(crate) fn finish(problem: &Problem, xi: DMatrix<f64>, diagnostics: Diagnostics) -> Self {
        let mut c = Self::from_xi(xi, problem.names.clone());
        c.residuals = problem.residual_norms(&c.xi);
        c.diagnostics = diagnostics;
        c
    }

    pub fn n_features(&self) -> usize {
        self.xi.nrows()
    }

    pub fn n_targets(&self) -> usize {
        self.xi.ncols()
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> usize {
        self.support.iter().filter(|&&s| s).count()
    }

    /// Support of target `j` as feature indices.
    pub fn support_of(&self, j: usize) -> Vec<usize> {
        (0..self.n_features()).filter(|&i| self.support[(i, j)]).collect()
    }
}

/// Regularizer used by SR3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    L0,
    L1,
}

/// Linear equality constraints `C · vec(Ξ) = d`, with `vec` stacking the
/// target columns of Ξ: entry `(feature i, target j)` is index `j * p + i`.
///
/// For two features and two targets, forcing `Ξ[1,0] = Ξ[0,1]` is
/// `C = [[0, 1, -1, 0]]`, `d = [0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualityConstraints {
    pub lhs: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

/// How SSR picks a model from its path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Refit the path on 75% of the rows and pick by residual on the rest.
    #[default]
    Holdout,
    /// Pick by training residual; use [`solve_path`] to choose manually.
    Path,
}

/// Sparse regression algorithm and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerSpec {
    /// Sequentially thresholded (ridge) least squares.
    Stlsq {
        #[serde(default = "d_stlsq_threshold")]
        threshold: f64,
        #[serde(default = "d_stlsq_alpha")]
        alpha: f64,
        #[serde(default = "d_stlsq_max_iter")]
        max_iter: usize,
    },
    /// Sparse relaxed regularized regression.
    Sr3 {
        #[serde(default = "d_stlsq_threshold")]
        threshold: f64,
        #[serde(default = "d_sr3_nu")]
        nu: f64,
        #[serde(default = "d_regularizer")]
        regularizer: Regularizer,
        #[serde(default = "d_sr3_max_iter")]
        max_iter: usize,
        #[serde(default = "d_sr3_tol")]
        tol: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        constraints: Option<EqualityConstraints>,
    },
    /// Stepwise sparse regression (backward elimination).
    Ssr {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_terms: Option<usize>,
        #[serde(default)]
        selection: Selection,
        #[serde(default)]
        seed: u64,
    },
    /// Forward regression with orthogonal least squares.
    Frols {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_terms: Option<usize>,
        #[serde(default = "d_frols_err_tol")]
        err_tol: f64,
    },
}

fn d_stlsq_threshold() -> f64 {
    STLSQ_THRESHOLD
}
fn d_stlsq_alpha() -> f64 {
    STLSQ_ALPHA
}
fn d_stlsq_max_iter() -> usize {
    STLSQ_MAX_ITER
}
fn d_sr3_nu() -> f64 {
    SR3_NU
}
fn d_regularizer() -> Regularizer {
    Regularizer::L0
}
fn d_sr3_max_iter() -> usize {
    SR3_MAX_ITER
}
fn d_sr3_tol() -> f64 {
    SR3_TOL
}
fn d_frols_err_tol() -> f64 {
    FROLS_ERR_TOL
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self::stlsq()
    }
}

impl OptimizerSpec {
    pub fn stlsq() -> Self {
        OptimizerSpec::Stlsq {
            threshold: STLSQ_THRESHOLD,
            alpha: STLSQ_ALPHA,
            max_iter: STLSQ_MAX_ITER,
        }
    }

    pub fn stlsq_with(threshold: f64, alpha: f64) -> Self {
        OptimizerSpec::Stlsq {
            threshold,
            alpha,
            max_iter: STLSQ_MAX_ITER,
        }
    }

    pub fn sr3(threshold: f64, regularizer: Regularizer) -> Self {
        OptimizerSpec::Sr3 {
            threshold,
            nu: SR3_NU,
            regularizer,
            max_iter: SR3_MAX_ITER,
            tol: SR3_TOL,
            constraints: None,
        }
    }

    pub fn ssr() -> Self {
        OptimizerSpec::Ssr {
            max_terms: None,
            selection: Selection::Holdout,
            seed: 0,
        }
    }

    pub fn frols() -> Self {
        OptimizerSpec::Frols {
            max_terms: None,
            err_tol: FROLS_ERR_TOL,
        }
    }

    /// Parameter checks that do not need the problem.
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64, f: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::param(f, "must be finite and >= 0"))
            }
        };
        match self {
            OptimizerSpec::Stlsq {
                threshold,
                alpha,
                max_iter,
            } => {
                nonneg(*threshold, "threshold")?;
                nonneg(*alpha, "alpha")?;
                if *max_iter == 0 {
                    return Err(Error::param("max_iter", "must be >= 1"));
                }
            }
            OptimizerSpec::Sr3 {
                threshold,
                nu,
                max_iter,
                tol,
                ..
            } => {
                nonneg(*threshold, "threshold")?;
                if !(nu.is_finite() && *nu > 0.0) {
                    return Err(Error::param("nu", "must be finite and > 0"));
                }
                nonneg(*tol, "tol")?;
                if *max_iter == 0 {
                    return Err(Error::param("max_iter", "must be >= 1"));
                }
            }
            OptimizerSpec::Ssr { max_terms, .. } | OptimizerSpec::Frols { max_terms, .. } => {
                if *max_terms == Some(0) {
                    return Err(Error::param("max_terms", "must be >= 1"));
                }
                if let OptimizerSpec::Frols { err_tol, .. } = self {
                    nonneg(*err_tol, "err_tol")?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for OptimizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimizerSpec::Stlsq { threshold, alpha, .. } => write!(f, "stlsq:{threshold},{alpha}"),
            OptimizerSpec::Sr3 {
                threshold,
                nu,
                regularizer,
                ..
            } => {
                let r = match regularizer {
                    Regularizer::L0 => "l0",
                    Regularizer::L1 => "l1",
                };
                write!(f, "sr3:{threshold},{nu},{r}")
            }
            OptimizerSpec::Ssr { .. } => f.write_str("ssr"),
            OptimizerSpec::Frols { .. } => f.write_str("frols"),
        }
    }
}

/// Parses `stlsq[:λ,α] | sr3[:λ,ν,l0|l1] | ssr | frols`.
impl FromStr for OptimizerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param("optimizer", format!("cannot parse `{s}`"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let spec = match (head, rest) {
            ("stlsq", None) => Self::stlsq(),
            ("stlsq", Some(r)) => {
                let (l, a) = r.split_once(',').ok_or_else(bad)?;
                Self::stlsq_with(num(l)?, num(a)?)
            }
            ("sr3", None) => Self::sr3(STLSQ_THRESHOLD, Regularizer::L0),
            ("sr3", Some(r)) => {
                let parts: Vec<&str> = r.split(',').collect();
                let [l, nu, reg] = parts[..] else {
                    return Err(bad());
                };
                let regularizer = match reg.trim() {
                    "l0" => Regularizer::L0,
                    "l1" => Regularizer::L1,
                    _ => return Err(bad()),
                };
                OptimizerSpec::Sr3 {
                    threshold: num(l)?,
                    nu: num(nu)?,
                    regularizer,
                    max_iter: SR3_MAX_ITER,
                    tol: SR3_TOL,
                    constraints: None,
                }
            }
            ("ssr", None) => Self::ssr(),
            ("frols", None) => Self::frols(),
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Solve the sparse regression problem.
pub fn solve(problem: &Problem, spec: &OptimizerSpec) -> Result<Coefficients> {
    spec.validate()?;
    match spec {
        OptimizerSpec::Stlsq {
            threshold,
            alpha,
            max_iter,
        } => {
            let prep = Prepared::new(problem);
            let out = stlsq::solve(&prep, *threshold, *alpha, *max_iter);
            Ok(Coefficients::finish(problem, prep.scatter(&out.xi), out.diagnostics))
        }
        OptimizerSpec::Sr3 {
            threshold,
            nu,
            regularizer,
            max_iter,
            tol,
            constraints,
        } => {
            let params = sr3::Params {
                threshold: *threshold,
                nu: *nu,
                regularizer: *regularizer,
                max_iter: *max_iter,
                tol: *tol,
            };
            let (xi, diag) = sr3::solve(problem, &params, constraints.as_ref())?;
            Ok(Coefficients::finish(problem, xi, diag))
        }
        OptimizerSpec::Ssr {
            max_terms,
            selection,
            seed,
        } => {
            let (xi, diag) = greedy::ssr_select(problem, *max_terms, *selection, *seed)?;
            Ok(Coefficients::finish(problem, xi, diag))
        }
        OptimizerSpec::Frols { max_terms, err_tol } => {
            let prep = Prepared::new(problem);
            let paths = greedy::frols_paths(&prep, *max_terms, *err_tol);
            let mut xi = DMatrix::zeros(prep.n_kept(), prep.n_targets());
            for (j, path) in paths.iter().enumerate() {
                if let Some(last) = path.last() {
                    for (&i, &v) in last.active.iter().zip(&last.coef) {
                        xi[(i, j)] = v;
                    }
                }
            }
            let diag = Diagnostics {
                converged: true,
                iterations: paths.iter().map(Vec::len).max().unwrap_or(0),
                rank_deficient: paths.iter().flatten().any(|s| s.rank_deficient),
                dropped_columns: prep.dropped(),
                empty_targets: paths
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.is_empty())
                    .map(|(j, _)| j)
                    .collect(),
                messages: Vec::new(),
            };
            Ok(Coefficients::finish(problem, prep.scatter(&xi), diag))
        }
    }
}

/// One model along a greedy path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub coefficients: Coefficients,
    /// Largest per-target support size at this step.
    pub n_terms: usize,
    /// Frobenius norm of the training residual.
    pub residual: f64,
}

/// Full model path of a greedy optimizer: decreasing support size for SSR,
/// increasing for FROLS.
pub fn solve_path(problem: &Problem, spec: &OptimizerSpec) -> Result<Vec<PathPoint>> {
    spec.validate()?;
    let prep = Prepared::new(problem);
    let paths = match spec {
        OptimizerSpec::Ssr { .. } => greedy::ssr_paths(&prep),
        OptimizerSpec::Frols { max_terms, err_tol } => greedy::frols_paths(&prep, *max_terms, *err_tol),
        _ => {
            return Err(Error::Optimizer(
                "solve_path is only defined for SSR and FROLS".into(),
            ))
        }
    };
    let len = paths.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::with_capacity(len);
    for step in 0..len {
        let mut xi = DMatrix::zeros(prep.n_kept(), prep.n_targets());
        let mut n_terms = 0;
        let mut rank_deficient = false;
        for (j, path) in paths.iter().enumerate() {
            let Some(s) = path.get(step).or(path.last()) else {
                continue;
            };
            n_terms = n_terms.max(s.active.len());
            rank_deficient |= s.rank_deficient;
            for (&i, &v) in s.active.iter().zip(&s.coef) {
                xi[(i, j)] = v;
            }
        }
        let diag = Diagnostics {
            converged: true,
            iterations: step + 1,
            rank_deficient,
            dropped_columns: prep.dropped(),
            ..Default::default()
        };
        let coefficients = Coefficients::finish(problem, prep.scatter(&xi), diag);
        let residual = coefficients.residuals.iter().map(|r| r * r).sum::<f64>().sqrt();
        out.push(PathPoint {
            coefficients,
            n_terms,
            residual,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
