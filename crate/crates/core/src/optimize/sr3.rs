//! Sparse relaxed regularized regression with optional equality constraints.

use nalgebra::DMatrix;

use super::lstsq::{lstsq, solve_square};
use super::{Diagnostics, EqualityConstraints, Prepared, Problem, Regularizer};
use crate::error::{Error, Result};

/// Constraint residual accepted on output.
pub const CONSTRAINT_TOL: f64 = 1e-8;
/// Relative singular value below which the constraint matrix is rank deficient.
const RANK_TOL: f64 = 1e-10;

pub(crate) struct Params {
    pub threshold: f64,
    pub nu: f64,
    pub regularizer: Regularizer,
    pub max_iter: usize,
    pub tol: f64,
}

/// `sign(x) max(|x| - t, 0)`.
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// `x` if `|x| > t`, else 0.
pub fn hard_threshold(x: f64, t: f64) -> f64 {
    if x.abs() > t {
        x
    } else {
        0.0
    }
}

fn prox(xi: &DMatrix<f64>, params: &Params) -> DMatrix<f64> {
    match params.regularizer {
        Regularizer::L0 => {
            let t = (2.0 * params.threshold * params.nu).sqrt();
            xi.map(|v| hard_threshold(v, t))
        }
        Regularizer::L1 => {
            let t = params.threshold * params.nu;
            xi.map(|v| soft_threshold(v, t))
        }
    }
}

/// Constraints restated over the kept, scaled coefficients
/// (index `j * p_kept + k`).
fn reduce_constraints(prep: &Prepared, c: &EqualityConstraints) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (p, n) = (prep.n_features, prep.n_targets());
    let rows = c.lhs.len();
    if rows == 0 || c.rhs.len() != rows {
        return Err(Error::Constraint(format!(
            "{rows} constraint rows but {} right-hand sides",
            c.rhs.len()
        )));
    }
    if rows > p * n {
        return Err(Error::Constraint(format!(
            "{rows} constraints exceed the {} coefficients",
            p * n
        )));
    }
    if let Some(r) = c.lhs.iter().find(|r| r.len() != p * n) {
        return Err(Error::Constraint(format!(
            "constraint row has {} entries, expected {}",
            r.len(),
            p * n
        )));
    }
    if c.lhs.iter().flatten().chain(&c.rhs).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("constraints".into()));
    }
    let pk = prep.n_kept();
    if pk == 0 {
        return Err(Error::Constraint("every feature column is zero; nothing to constrain".into()));
    }
    let mut cm = DMatrix::zeros(rows, pk * n);
    for (r, row) in c.lhs.iter().enumerate() {
        for j in 0..n {
            for (k, &orig) in prep.kept.iter().enumerate() {
                cm[(r, j * pk + k)] = row[j * p + orig] / prep.scale[k];
            }
        }
    }
    let svd = cm.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > smax * RANK_TOL).count();
    if smax == 0.0 || rank < rows {
        return Err(Error::Constraint(format!(
            "constraint matrix has rank {rank} < {rows} rows on the non-zero features"
        )));
    }
    Ok((cm, DMatrix::from_column_slice(rows, 1, &c.rhs)))
}

/// Linear solver for the relaxed ξ-step, `(RᵀR + I/ν) ξ = Rᵀb + W/ν`,
/// optionally subject to `C vec(ξ) = d`.
struct XiStep {
    pk: usize,
    n: usize,
    rtb: DMatrix<f64>,
    inv_nu: f64,
    kind: StepKind,
}

enum StepKind {
    Free(DMatrix<f64>),
    Constrained { kkt_inv: DMatrix<f64>, d: DMatrix<f64> },
}

impl XiStep {
    fn new(prep: &Prepared, nu: f64, constraints: Option<(DMatrix<f64>, DMatrix<f64>)>) -> Self {
        let (pk, n) = (prep.n_kept(), prep.n_targets());
        let rtr = prep.r.transpose() * &prep.r;
        let rtb = prep.r.transpose() * &prep.b;
        let inv_nu = 1.0 / nu;
        let h = &rtr + DMatrix::identity(pk, pk) * inv_nu;
        let kind = match constraints {
            None => StepKind::Free(solve_square(&h, &DMatrix::identity(pk, pk))),
            Some((c, d)) => {
                let k = c.nrows();
                let size = pk * n + k;
                let mut kkt = DMatrix::zeros(size, size);
                for j in 0..n {
                    kkt.view_mut((j * pk, j * pk), (pk, pk)).copy_from(&h);
                }
                kkt.view_mut((pk * n, 0), (k, pk * n)).copy_from(&c);
                kkt.view_mut((0, pk * n), (pk * n, k)).copy_from(&c.transpose());
                let kkt_inv = solve_square(&kkt, &DMatrix::identity(size, size));
                StepKind::Constrained { kkt_inv, d }
            }
        };
        Self {
            pk,
            n,
            rtb,
            inv_nu,
            kind,
        }
    }

    fn solve(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let rhs = &self.rtb + w * self.inv_nu;
        match &self.kind {
            StepKind::Free(h_inv) => h_inv * rhs,
            StepKind::Constrained { kkt_inv, d } => {
                let (pk, n) = (self.pk, self.n);
                let mut full = DMatrix::zeros(pk * n + d.nrows(), 1);
                full.view_mut((0, 0), (pk * n, 1))
                    .copy_from_slice(rhs.as_slice());
                full.view_mut((pk * n, 0), (d.nrows(), 1)).copy_from(d);
                let z = kkt_inv * full;
                DMatrix::from_column_slice(pk, n, &z.as_slice()[..pk * n])
            }
        }
    }
}

/// Least squares restricted to `support` subject to `C vec(ξ) = d`.
fn constrained_polish(
    prep: &Prepared,
    support: &DMatrix<bool>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let (pk, n) = (prep.n_kept(), prep.n_targets());
    let idx: Vec<usize> = (0..pk * n).filter(|&v| support[(v % pk, v / pk)]).collect();
    if idx.is_empty() {
        return None;
    }
    let rtr = prep.r.transpose() * &prep.r;
    let rtb = prep.r.transpose() * &prep.b;
    let (s, k) = (idx.len(), c.nrows());
    let mut kkt = DMatrix::zeros(s + k, s + k);
    let mut rhs = DMatrix::zeros(s + k, 1);
    for (a, &va) in idx.iter().enumerate() {
        let (ia, ja) = (va % pk, va / pk);
        rhs[a] = rtb[(ia, ja)];
        for (b, &vb) in idx.iter().enumerate() {
            let (ib, jb) = (vb % pk, vb / pk);
            if ja == jb {
                kkt[(a, b)] = rtr[(ia, ib)];
            }
        }
        for r in 0..k {
            kkt[(s + r, a)] = c[(r, va)];
            kkt[(a, s + r)] = c[(r, va)];
        }
    }
    for r in 0..k {
        rhs[s + r] = d[r];
    }
    let z = lstsq(&kkt, &rhs, 0.0).x;
    let mut xi = DMatrix::zeros(pk, n);
    for (a, &v) in idx.iter().enumerate() {
        xi[(v % pk, v / pk)] = z[a];
    }
    let viol = constraint_violation(&xi, c, d);
    (viol <= CONSTRAINT_TOL && xi.iter().all(|v| v.is_finite())).then_some(xi)
}

fn constraint_violation(xi: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let v = DMatrix::from_column_slice(xi.len(), 1, xi.as_slice());
    (c * v - d).amax()
}

pub(crate) fn solve(
    problem: &Problem,
    params: &Params,
    constraints: Option<&EqualityConstraints>,
) -> Result<(DMatrix<f64>, Diagnostics)> {
    let prep = Prepared::new(problem);
    let (pk, n) = (prep.n_kept(), prep.n_targets());
    let mut diag = Diagnostics {
        dropped_columns: prep.dropped(),
        ..Default::default()
    };
    let reduced = constraints.map(|c| reduce_constraints(&prep, c)).transpose()?;
    if pk == 0 {
        return Ok((DMatrix::zeros(prep.n_features, n), diag));
    }
    let step = XiStep::new(&prep, params.nu, reduced.clone());
    // Start from the (constrained) least-squares-like solution with W = 0.
    let mut xi = step.solve(&DMatrix::zeros(pk, n));
    let mut w = prox(&xi, params);
    let norm = ((pk * n) as f64).sqrt();
    for it in 1..=params.max_iter {
        diag.iterations = it;
        xi = step.solve(&w);
        let w_next = prox(&xi, params);
        let gap = (&xi - &w_next).norm() / norm;
        let change = (&w_next - &w).norm() / norm;
        w = w_next;
        if gap < params.tol || change < params.tol {
            diag.converged = true;
            break;
        }
    }
    if !diag.converged {
        diag.messages
            .push(format!("relaxation did not converge in {} iterations", params.max_iter));
    }
    let support = w.map(|v| v != 0.0);
    let out = match &reduced {
        None => {
            if params.regularizer == Regularizer::L0 {
                // Unbiased refit on the selected support, target by target.
                let mut out = DMatrix::zeros(pk, n);
                for j in 0..n {
                    let active: Vec<usize> = (0..pk).filter(|&i| support[(i, j)]).collect();
                    let (fit, rd) = prep.fit_subset(&active, j, 0.0);
                    diag.rank_deficient |= rd;
                    for (&i, &v) in active.iter().zip(&fit) {
                        out[(i, j)] = v;
                    }
                }
                out
            } else {
                w
            }
        }
        Some((c, d)) => match constrained_polish(&prep, &support, c, d) {
            Some(p) => p,
            None => {
                diag.messages.push(
                    "constraints not satisfiable on the sparse support; returning the relaxed solution".into(),
                );
                xi.clone()
            }
        },
    };
    if let Some((c, d)) = &reduced {
        let viol = constraint_violation(&out, c, d);
        if viol > CONSTRAINT_TOL {
            return Err(Error::Constraint(format!(
                "constraint violation {viol:e} exceeds {CONSTRAINT_TOL:e}; system is infeasible"
            )));
        }
    }
    for j in 0..n {
        if out.column(j).iter().all(|&v| v == 0.0) {
            diag.empty_targets.push(j);
        }
    }
    Ok((prep.scatter(&out), diag))
}
