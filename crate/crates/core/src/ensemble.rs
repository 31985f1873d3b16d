//! Bagging and library-dropping ensembles of sparse regressions.
//!
//! Each member refits the optimizer on a seeded resample of the rows with a
//! few library columns forced to zero. The members are then reduced entry by
//! entry: the aggregate keeps an entry when at least `threshold` of the
//! members selected it, with the median (default) or mean of the member
//! values as its coefficient. The median is a choice, not a derived rule; it
//! keeps a few diverging members from dragging the estimate.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{self, Coefficients, Diagnostics, OptimizerSpec, Problem};

pub const DEFAULT_MODELS: usize = 20;
pub const DEFAULT_ROW_FRACTION: f64 = 0.6;
pub const DEFAULT_INCLUSION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    #[default]
    Median,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    pub n_models: usize,
    pub row_fraction: f64,
    /// Draw rows with replacement (bagging).
    pub replace: bool,
    /// Library columns removed per member.
    pub n_library_drop: usize,
    pub aggregator: Aggregator,
    /// Minimum inclusion probability kept in the aggregate.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            n_models: DEFAULT_MODELS,
            row_fraction: DEFAULT_ROW_FRACTION,
            replace: true,
            n_library_drop: 0,
            aggregator: Aggregator::Median,
            threshold: DEFAULT_INCLUSION_THRESHOLD,
            seed: 0,
        }
    }
}

impl EnsembleSpec {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_models < 2 {
            return Err(Error::param("n_models", "must be >= 2"));
        }
        if !(self.row_fraction > 0.0 && self.row_fraction <= 1.0) {
            return Err(Error::param("row_fraction", "must be in (0, 1]"));
        }
        if self.n_library_drop >= n_features {
            return Err(Error::param(
                "n_library_drop",
                format!("must be < the {n_features} library columns"),
            ));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::param("threshold", "must be in [0, 1]"));
        }
        Ok(())
    }

    fn n_rows(&self, m: usize) -> usize {
        ((self.row_fraction * m as f64).ceil() as usize).clamp(1, m)
    }
}

impl fmt::Display for EnsembleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let agg = match self.aggregator {
            Aggregator::Median => "median",
            Aggregator::Mean => "mean",
        };
        write!(
            f,
            "n={},rows={},replace={},drop={},agg={},threshold={},seed={}",
            self.n_models, self.row_fraction, self.replace, self.n_library_drop, agg, self.threshold, self.seed
        )
    }
}

/// Parses comma-separated `key=value` pairs over the defaults, e.g.
/// `n=20,rows=0.6,drop=0,agg=median,seed=3`.
impl FromStr for EnsembleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = Self::default();
        let bad = |what: &str| Error::param("ensemble", format!("cannot parse `{what}`"));
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| bad(part))?;
            match k.trim() {
                "n" => spec.n_models = v.parse().map_err(|_| bad(part))?,
                "rows" => spec.row_fraction = v.parse().map_err(|_| bad(part))?,
                "replace" => spec.replace = v.parse().map_err(|_| bad(part))?,
                "drop" => spec.n_library_drop = v.parse().map_err(|_| bad(part))?,
                "threshold" => spec.threshold = v.parse().map_err(|_| bad(part))?,
                "seed" => spec.seed = v.parse().map_err(|_| bad(part))?,
                "agg" => {
                    spec.aggregator = match v.trim() {
                        "median" => Aggregator::Median,
                        "mean" => Aggregator::Mean,
                        _ => return Err(bad(part)),
                    }
                }
                _ => return Err(bad(part)),
            }
        }
        if spec.n_models < 2 || !(spec.row_fraction > 0.0 && spec.row_fraction <= 1.0) {
            return Err(bad(s));
        }
        Ok(spec)
    }
}

/// Scrambles a member index into an independent stream seed.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Rows and dropped columns of one member.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberDraw {
    pub rows: Vec<usize>,
    pub dropped: Vec<usize>,
}

pub fn member_draw(spec: &EnsembleSpec, member: usize, m: usize, p: usize) -> MemberDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(spec.seed.wrapping_add(member as u64)));
    let k = spec.n_rows(m);
    let rows = if spec.replace {
        (0..k).map(|_| rng.random_range(0..m)).collect()
    } else {
        let mut r = index::sample(&mut rng, m, k).into_vec();
        r.sort_unstable();
        r
    };
    let mut dropped = index::sample(&mut rng, p, spec.n_library_drop).into_vec();
    dropped.sort_unstable();
    MemberDraw { rows, dropped }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    /// Coefficients of the successful members, in member order.
    pub members: Vec<DMatrix<f64>>,
    /// Indices and errors of members whose solve failed.
    pub failures: Vec<(usize, String)>,
    pub aggregate: Coefficients,
    pub inclusion_probability: DMatrix<f64>,
    /// Interquartile range of each entry across members.
    pub iqr: DMatrix<f64>,
}

fn solve_member(problem: &Problem, opt: &OptimizerSpec, draw: &MemberDraw) -> Result<Coefficients> {
    let p = problem.n_features();
    let keep: Vec<usize> = (0..p).filter(|c| draw.dropped.binary_search(c).is_err()).collect();
    let sub = problem.select_rows(&draw.rows)?.select_columns(&keep)?;
    let c = optimize::solve(&sub, opt)?;
    let mut xi = DMatrix::zeros(p, problem.n_targets());
    for (k, &col) in keep.iter().enumerate() {
        xi.set_row(col, &c.xi.row(k));
    }
    let mut out = Coefficients::from_xi(xi, problem.names().to_vec());
    out.diagnostics = c.diagnostics;
    Ok(out)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Mean written as an offset from the first value so identical inputs
/// reproduce that value exactly.
pub fn mean(values: &[f64]) -> f64 {
    let x0 = values[0];
    x0 + values.iter().map(|v| v - x0).sum::<f64>() / values.len() as f64
}

pub fn fit_ensemble(problem: &Problem, opt: &OptimizerSpec, spec: &EnsembleSpec) -> Result<EnsembleReport> {
    let (m, p, n) = (problem.n_samples(), problem.n_features(), problem.n_targets());
    spec.validate(p)?;
    opt.validate()?;
    if (spec.n_rows(m) as f64) < p as f64 {
        log::warn!(
            "ensemble members see {} rows for {p} library columns",
            spec.n_rows(m)
        );
    }
    let results: Vec<Result<Coefficients>> = (0..spec.n_models)
        .into_par_iter()
        .map(|i| solve_member(problem, opt, &member_draw(spec, i, m, p)))
        .collect();
    let mut members = Vec::new();
    let mut failures = Vec::new();
    let mut diag = Diagnostics {
        converged: true,
        ..Default::default()
    };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(c) => {
                diag.converged &= c.diagnostics.converged;
                diag.rank_deficient |= c.diagnostics.rank_deficient;
                members.push(c.xi);
            }
            Err(e) => {
                diag.messages.push(format!("member {i} failed: {e}"));
                failures.push((i, e.to_string()));
            }
        }
    }
    if failures.len() * 2 > spec.n_models {
        return Err(Error::Ensemble(format!(
            "{} of {} members failed; first error: {}",
            failures.len(),
            spec.n_models,
            failures[0].1
        )));
    }
    let count = members.len();
    let mut inclusion = DMatrix::zeros(p, n);
    let mut iqr = DMatrix::zeros(p, n);
    let mut xi = DMatrix::zeros(p, n);
    let mut values = vec![0.0; count];
    for j in 0..n {
        for i in 0..p {
            for (v, mem) in values.iter_mut().zip(&members) {
                *v = mem[(i, j)];
            }
            let nonzero = values.iter().filter(|v| **v != 0.0).count();
            inclusion[(i, j)] = nonzero as f64 / count as f64;
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            iqr[(i, j)] = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
            if inclusion[(i, j)] >= spec.threshold && nonzero > 0 {
                xi[(i, j)] = match spec.aggregator {
                    Aggregator::Median => quantile_sorted(&sorted, 0.5),
                    Aggregator::Mean => mean(&values),
                };
            }
        }
    }
    diag.empty_targets = (0..n).filter(|&j| xi.column(j).iter().all(|v| *v == 0.0)).collect();
    diag.iterations = count;
    let aggregate = Coefficients::finish(problem, xi, diag);
    Ok(EnsembleReport {
        members,
        failures,
        aggregate,
        inclusion_probability: inclusion,
        iqr,
    })
}
