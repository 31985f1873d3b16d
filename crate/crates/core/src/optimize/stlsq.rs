//! Sequentially thresholded least squares.

use nalgebra::DMatrix;

use super::{Diagnostics, Prepared};

pub(crate) struct Output {
    pub xi: DMatrix<f64>,
    pub diagnostics: Diagnostics,
    /// Per target, per iteration: residual of the thresholded coefficients
    /// and of the refit that followed.
    #[cfg_attr(not(test), allow(dead_code))]
    pub trace: Vec<Vec<(f64, f64)>>,
}

pub(crate) fn solve(prep: &Prepared, threshold: f64, alpha: f64, max_iter: usize) -> Output {
    let (p, n) = (prep.n_kept(), prep.n_targets());
    let mut xi = DMatrix::zeros(p, n);
    let mut diag = Diagnostics {
        converged: true,
        dropped_columns: prep.dropped(),
        ..Default::default()
    };
    let mut trace = Vec::with_capacity(n);
    for j in 0..n {
        let mut active: Vec<usize> = (0..p).collect();
        let mut coef = vec![0.0; p];
        let mut steps = Vec::new();
        let mut converged = false;
        let mut iters = 0;
        while iters < max_iter && !active.is_empty() {
            iters += 1;
            let (fit, rd) = prep.fit_subset(&active, j, alpha);
            diag.rank_deficient |= rd;
            let mut full = vec![0.0; p];
            for (&i, &v) in active.iter().zip(&fit) {
                full[i] = v;
            }
            if iters > 1 {
                steps.push((prep.compressed_residual(&coef, j), prep.compressed_residual(&full, j)));
            }
            let kept: Vec<usize> = active.iter().copied().filter(|&i| full[i].abs() >= threshold).collect();
            for v in full.iter_mut() {
                if v.abs() < threshold {
                    *v = 0.0;
                }
            }
            coef = full;
            if kept == active {
                converged = true;
                break;
            }
            active = kept;
        }
        trace.push(steps);
        if active.is_empty() {
            diag.empty_targets.push(j);
            diag.messages
                .push(format!("target {j}: every coefficient fell below the threshold {threshold}"));
            continue;
        }
        if !converged {
            diag.converged = false;
            diag.messages
                .push(format!("target {j}: support still changing after {max_iter} iterations"));
        }
        diag.iterations = diag.iterations.max(iters);
        // Unregularized refit on the final support removes the ridge bias.
        let support: Vec<usize> = (0..p).filter(|&i| coef[i] != 0.0).collect();
        let (fit, rd) = prep.fit_subset(&support, j, 0.0);
        diag.rank_deficient |= rd;
        for (&i, &v) in support.iter().zip(&fit) {
            xi[(i, j)] = v;
        }
    }
    if diag.rank_deficient {
        diag.messages
            .push("rank-deficient active set; minimum-norm least squares used".into());
    }
    Output {
        xi,
        diagnostics: diag,
        trace,
    }
}
