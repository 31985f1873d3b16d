use nalgebra::DMatrix;

/// Singular values below this fraction of the largest are treated as zero.
pub(crate) const RCOND: f64 = 1e-12;

pub(crate) struct LsSolution {
    pub x: DMatrix<f64>,
    pub rank_deficient: bool,
}

/// Minimum-norm solution of `min ‖A x - B‖² + ridge ‖x‖²` via SVD.
pub(crate) fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>, ridge: f64) -> LsSolution {
    let (m, p) = a.shape();
    if p == 0 || m == 0 {
        return LsSolution {
            x: DMatrix::zeros(p, b.ncols()),
            rank_deficient: p > 0,
        };
    }
    let (a_aug, b_aug) = if ridge > 0.0 {
        let mut aa = DMatrix::zeros(m + p, p);
        aa.view_mut((0, 0), (m, p)).copy_from(a);
        for i in 0..p {
            aa[(m + i, i)] = ridge.sqrt();
        }
        let mut bb = DMatrix::zeros(m + p, b.ncols());
        bb.view_mut((0, 0), (m, b.ncols())).copy_from(b);
        (aa, bb)
    } else {
        (a.clone(), b.clone())
    };
    let svd = a_aug.svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return LsSolution {
            x: DMatrix::zeros(p, b.ncols()),
            rank_deficient: true,
        };
    }
    let tol = smax * RCOND;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let x = svd.solve(&b_aug, tol).expect("SVD with U and V computed");
    LsSolution {
        x,
        rank_deficient: rank < p,
    }
}

/// Solve the square system `K z = r` in the least-squares sense; used for
/// KKT systems that may be singular.
pub(crate) fn solve_square(k: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(lu) = k.clone().full_piv_lu().try_inverse() {
        let z = &lu * r;
        if z.iter().all(|v| v.is_finite()) {
            return z;
        }
    }
    lstsq(k, r, 0.0).x
}
