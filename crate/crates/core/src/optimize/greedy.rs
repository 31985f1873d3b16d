//! Greedy path algorithms: backward stepwise elimination (SSR) and forward
//! orthogonal least squares (FROLS).

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Diagnostics, Prepared, Problem, Selection, HOLDOUT_FRACTION, PARSIMONY_MARGIN};
use crate::error::Result;

/// One model on a single target's path; indices refer to kept columns.
#[derive(Debug, Clone)]
pub(crate) struct Step {
    pub active: Vec<usize>,
    pub coef: Vec<f64>,
    pub rank_deficient: bool,
}

fn fit(prep: &Prepared, active: Vec<usize>, j: usize) -> Step {
    let (coef, rank_deficient) = prep.fit_subset(&active, j, 0.0);
    Step {
        active,
        coef,
        rank_deficient,
    }
}

/// Backward elimination: drop the coefficient with the smallest
/// `|ξ_i| ‖θ_i‖` and refit, down to a single term.
pub(crate) fn ssr_paths(prep: &Prepared) -> Vec<Vec<Step>> {
    (0..prep.n_targets())
        .map(|j| {
            let mut path = Vec::with_capacity(prep.n_kept());
            if prep.n_kept() == 0 {
                return path;
            }
            let mut step = fit(prep, (0..prep.n_kept()).collect(), j);
            loop {
                path.push(step.clone());
                if step.active.len() == 1 {
                    break;
                }
                let weakest = (0..step.active.len())
                    .min_by(|&a, &b| {
                        let ma = step.coef[a].abs() * prep.col_norms[step.active[a]];
                        let mb = step.coef[b].abs() * prep.col_norms[step.active[b]];
                        ma.total_cmp(&mb)
                    })
                    .expect("non-empty support");
                let mut active = step.active.clone();
                active.remove(weakest);
                step = fit(prep, active, j);
            }
            path
        })
        .collect()
}

/// Forward selection by error reduction ratio with classical Gram-Schmidt
/// orthogonalization. Inner products of the compressed system equal those
/// of the original rows, so the ratios are unchanged by compression.
pub(crate) fn frols_paths(prep: &Prepared, max_terms: Option<usize>, err_tol: f64) -> Vec<Vec<Step>> {
    let pk = prep.n_kept();
    let limit = max_terms.unwrap_or(pk).min(pk);
    (0..prep.n_targets())
        .map(|j| {
            let mut path = Vec::new();
            let yy = prep.yy[j];
            if yy == 0.0 {
                return path;
            }
            let b = prep.b.column(j);
            let mut basis: Vec<DVector<f64>> = Vec::new();
            let mut selected: Vec<usize> = Vec::new();
            while selected.len() < limit {
                let mut best: Option<(usize, f64, DVector<f64>)> = None;
                for c in (0..pk).filter(|c| !selected.contains(c)) {
                    let col = prep.r.column(c).into_owned();
                    let mut w = col.clone();
                    for q in &basis {
                        w -= q * (col.dot(q) / q.dot(q));
                    }
                    let ww = w.dot(&w);
                    if ww <= 1e-12 * col.dot(&col) {
                        continue;
                    }
                    let g = w.dot(&b) / ww;
                    let err = g * g * ww / yy;
                    if best.as_ref().is_none_or(|(_, e, _)| err > *e) {
                        best = Some((c, err, w));
                    }
                }
                let Some((c, err, w)) = best else { break };
                if err < err_tol {
                    break;
                }
                selected.push(c);
                basis.push(w);
                path.push(fit(prep, selected.clone(), j));
            }
            path
        })
        .collect()
}

/// Picks the sparsest step whose residual is within the parsimony margin of
/// the best admissible one.
fn choose(residuals: &[(usize, f64)], max_terms: Option<usize>, scale: f64) -> Option<usize> {
    let cap = max_terms.unwrap_or(usize::MAX);
    let admissible: Vec<(usize, usize, f64)> = residuals
        .iter()
        .enumerate()
        .filter(|(_, (k, _))| *k <= cap)
        .map(|(i, &(k, r))| (i, k, r))
        .collect();
    let best = admissible.iter().map(|a| a.2).fold(f64::INFINITY, f64::min);
    let bound = best * (1.0 + PARSIMONY_MARGIN) + 1e-10 * scale;
    admissible
        .iter()
        .filter(|a| a.2 <= bound)
        .min_by_key(|a| a.1)
        .map(|a| a.0)
}

fn residual_of(theta: &DMatrix<f64>, y: &DVector<f64>, support: &[usize], coef: &[f64]) -> f64 {
    let mut r = y.clone();
    for (&c, &v) in support.iter().zip(coef) {
        r.axpy(-v, &theta.column(c), 1.0);
    }
    r.norm()
}

fn weighted_rows(problem: &Problem, rows: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let sub = problem.select_rows(rows).expect("rows drawn from a valid problem");
    sub.weighted()
}

/// Full SSR: build the path and select one model per target.
pub(crate) fn ssr_select(
    problem: &Problem,
    max_terms: Option<usize>,
    selection: Selection,
    seed: u64,
) -> Result<(DMatrix<f64>, Diagnostics)> {
    let full = Prepared::new(problem);
    let n = problem.n_targets();
    let mut diag = Diagnostics {
        converged: true,
        dropped_columns: full.dropped(),
        ..Default::default()
    };
    let m = problem.n_samples();
    let n_hold = (HOLDOUT_FRACTION * m as f64).ceil() as usize;
    let use_holdout = selection == Selection::Holdout && n_hold >= 1 && m - n_hold >= full.n_kept().max(1);
    if selection == Selection::Holdout && !use_holdout {
        diag.messages
            .push("too few rows for a holdout split; selected on training residual".into());
    }
    // Supports are tracked as original feature indices.
    let mut chosen: Vec<Vec<usize>> = Vec::with_capacity(n);
    if use_holdout {
        let mut rows: Vec<usize> = (0..m).collect();
        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (hold, train) = rows.split_at(n_hold);
        let train_prep = Prepared::new(&problem.select_rows(train)?);
        let (h_theta, h_y) = weighted_rows(problem, hold);
        let paths = ssr_paths(&train_prep);
        for (j, path) in paths.iter().enumerate() {
            let y = h_y.column(j).into_owned();
            let scored: Vec<(usize, f64)> = path
                .iter()
                .map(|s| {
                    let support: Vec<usize> = s.active.iter().map(|&k| train_prep.kept[k]).collect();
                    let coef: Vec<f64> = s
                        .active
                        .iter()
                        .zip(&s.coef)
                        .map(|(&k, &v)| v / train_prep.scale[k])
                        .collect();
                    (s.active.len(), residual_of(&h_theta, &y, &support, &coef))
                })
                .collect();
            diag.iterations = diag.iterations.max(path.len());
            chosen.push(match choose(&scored, max_terms, y.norm()) {
                Some(i) => path[i].active.iter().map(|&k| train_prep.kept[k]).collect(),
                None => Vec::new(),
            });
        }
    } else {
        let paths = ssr_paths(&full);
        for (j, path) in paths.iter().enumerate() {
            let scored: Vec<(usize, f64)> = path
                .iter()
                .map(|s| (s.active.len(), full.true_residual(&s.active, &s.coef, j)))
                .collect();
            diag.iterations = diag.iterations.max(path.len());
            chosen.push(match choose(&scored, max_terms, full.yy[j].sqrt()) {
                Some(i) => path[i].active.iter().map(|&k| full.kept[k]).collect(),
                None => Vec::new(),
            });
        }
    }
    // Refit the chosen supports on every row.
    let mut xi = DMatrix::zeros(full.n_kept(), n);
    for (j, support) in chosen.iter().enumerate() {
        let active: Vec<usize> = support
            .iter()
            .filter_map(|orig| full.kept.iter().position(|k| k == orig))
            .collect();
        if active.is_empty() {
            diag.empty_targets.push(j);
            continue;
        }
        let s = fit(&full, active, j);
        diag.rank_deficient |= s.rank_deficient;
        for (&i, &v) in s.active.iter().zip(&s.coef) {
            xi[(i, j)] = v;
        }
    }
    Ok((full.scatter(&xi), diag))
}
