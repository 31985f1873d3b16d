use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;

fn planted(noise: f64, seed: u64) -> (Problem, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = DMatrix::from_fn(200, 10, |_, _| StandardNormal.sample(&mut rng));
    let mut truth = DMatrix::zeros(10, 1);
    truth[1] = 2.0;
    truth[3] = -1.5;
    let mut y = &theta * &truth;
    for v in y.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *v += noise * e;
    }
    (Problem::new(theta, y).unwrap(), truth)
}

fn one_target(theta: DMatrix<f64>, y: &[f64]) -> Problem {
    let m = y.len();
    Problem::new(theta, DMatrix::from_column_slice(m, 1, y)).unwrap()
}

#[test]
fn stlsq_without_threshold_is_least_squares() {
    let p = one_target(DMatrix::identity(2, 2), &[3.0, 5.0]);
    let c = solve(&p, &OptimizerSpec::stlsq_with(0.0, 0.0)).unwrap();
    assert_eq!(c.xi.as_slice(), &[3.0, 5.0]);
    assert!(c.diagnostics.converged);
}

#[test]
fn stlsq_one_threshold_pass() {
    let p = one_target(DMatrix::identity(2, 2), &[3.0, 0.1]);
    let c = solve(&p, &OptimizerSpec::stlsq_with(0.5, 0.0)).unwrap();
    assert_eq!(c.xi.as_slice(), &[3.0, 0.0]);
    assert_eq!(c.support_of(0), vec![0]);
}

#[test]
fn stlsq_ridge_bias_removed_by_final_refit() {
    let p = one_target(DMatrix::identity(2, 2), &[3.0, 0.1]);
    let c = solve(&p, &OptimizerSpec::stlsq_with(0.5, 0.05)).unwrap();
    assert!((c.xi[0] - 3.0).abs() < 1e-12);
    assert_eq!(c.xi[1], 0.0);
}

#[test]
fn frols_orders_orthogonal_columns_by_correlation() {
    // Orthogonal columns with target correlations 1, 3, 2 (in magnitude).
    let theta = DMatrix::identity(3, 3);
    let p = one_target(theta, &[1.0, -3.0, 2.0]);
    let path = solve_path(&p, &OptimizerSpec::frols()).unwrap();
    let order: Vec<Vec<usize>> = path.iter().map(|s| s.coefficients.support_of(0)).collect();
    assert_eq!(order, vec![vec![1], vec![1, 2], vec![0, 1, 2]]);
}

#[test]
fn all_optimizers_recover_planted_coefficients() {
    let (p, truth) = planted(0.0, 42);
    for spec in [
        OptimizerSpec::stlsq(),
        OptimizerSpec::sr3(0.1, Regularizer::L0),
        OptimizerSpec::ssr(),
        OptimizerSpec::frols(),
    ] {
        let c = solve(&p, &spec).unwrap();
        assert_eq!(c.support_of(0), vec![1, 3], "{spec}");
        let err = (&c.xi - &truth).amax();
        assert!(err < 1e-6, "{spec}: error {err}");
    }
}

#[test]
fn ssr_path_removes_one_term_per_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let theta = DMatrix::from_fn(20, 3, |_, _| StandardNormal.sample(&mut rng));
    let y: Vec<f64> = (0..20).map(|_| StandardNormal.sample(&mut rng)).collect();
    let path = solve_path(&one_target(theta, &y), &OptimizerSpec::ssr()).unwrap();
    let sizes: Vec<usize> = path.iter().map(|s| s.n_terms).collect();
    assert_eq!(sizes, vec![3, 2, 1]);
    for s in &path {
        assert_eq!(s.coefficients.nnz(), s.n_terms);
    }
}

#[test]
fn ssr_holdout_picks_planted_size() {
    let (p, _) = planted(0.0, 42);
    let c = solve(&p, &OptimizerSpec::ssr()).unwrap();
    assert_eq!(c.nnz(), 2);
    let (noisy, _) = planted(0.05, 43);
    let c = solve(&noisy, &OptimizerSpec::ssr()).unwrap();
    assert_eq!(c.support_of(0), vec![1, 3]);
}

#[test]
fn ssr_max_terms_caps_selection() {
    let (p, _) = planted(0.0, 42);
    let spec = OptimizerSpec::Ssr {
        max_terms: Some(1),
        selection: Selection::Path,
        seed: 0,
    };
    let c = solve(&p, &spec).unwrap();
    assert_eq!(c.support_of(0), vec![1]);
}

#[test]
fn support_matches_nonzero_pattern_bitwise() {
    let (p, _) = planted(0.1, 5);
    for spec in [
        OptimizerSpec::stlsq(),
        OptimizerSpec::sr3(0.05, Regularizer::L1),
        OptimizerSpec::ssr(),
        OptimizerSpec::frols(),
    ] {
        let c = solve(&p, &spec).unwrap();
        for (x, s) in c.xi.iter().zip(c.support.iter()) {
            assert_eq!(*s, x.to_bits() != 0.0f64.to_bits() && *x != 0.0);
            if !s {
                assert_eq!(x.to_bits(), 0.0f64.to_bits(), "{spec}");
            }
        }
        assert!(c.residuals.iter().all(|r| *r >= 0.0));
    }
}

#[test]
fn normalization_makes_support_scale_invariant() {
    let (p, _) = planted(0.01, 8);
    let c = 1e3;
    let mut scaled = p.theta().clone();
    scaled.column_mut(3).scale_mut(c);
    let q = Problem::new(scaled, p.targets().clone()).unwrap().with_normalization(true);
    let p = p.with_normalization(true);
    for spec in [OptimizerSpec::stlsq(), OptimizerSpec::frols()] {
        let a = solve(&p, &spec).unwrap();
        let b = solve(&q, &spec).unwrap();
        assert_eq!(a.support, b.support, "{spec}");
        assert!((b.xi[3] * c - a.xi[3]).abs() < 1e-9 * a.xi[3].abs(), "{spec}");
    }
}

#[test]
fn sr3_constraints_hold_on_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let theta = DMatrix::from_fn(60, 3, |_, _| StandardNormal.sample(&mut rng));
    let truth = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, 0.7, 0.0, 0.0, -2.0]);
    let mut y = &theta * &truth;
    for v in y.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *v += 0.05 * e;
    }
    let problem = Problem::new(theta, y).unwrap();
    // Ξ[1,0] = Ξ[0,1] and Ξ[0,0] + Ξ[2,1] = -1.2 over target-major vec(Ξ).
    let constraints = EqualityConstraints {
        lhs: vec![vec![0.0, 1.0, 0.0, -1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]],
        rhs: vec![0.0, -1.2],
    };
    for reg in [Regularizer::L0, Regularizer::L1] {
        for normalize in [false, true] {
            let spec = OptimizerSpec::Sr3 {
                threshold: 0.05,
                nu: 1.0,
                regularizer: reg,
                max_iter: 100,
                tol: 1e-8,
                constraints: Some(constraints.clone()),
            };
            let c = solve(&problem.clone().with_normalization(normalize), &spec).unwrap();
            let x = |i: usize, j: usize| c.xi[(i, j)];
            assert!((x(1, 0) - x(0, 1)).abs() <= 1e-8, "{reg:?}");
            assert!((x(0, 0) + x(2, 1) + 1.2).abs() <= 1e-8, "{reg:?}");
        }
    }
}

#[test]
fn sr3_rejects_dependent_constraints() {
    let (p, _) = planted(0.0, 1);
    let row = {
        let mut r = vec![0.0; 10];
        r[0] = 1.0;
        r
    };
    let spec = OptimizerSpec::Sr3 {
        threshold: 0.1,
        nu: 1.0,
        regularizer: Regularizer::L0,
        max_iter: 30,
        tol: 1e-5,
        constraints: Some(EqualityConstraints {
            lhs: vec![row.clone(), row],
            rhs: vec![0.0, 1.0],
        }),
    };
    assert!(matches!(solve(&p, &spec), Err(Error::Constraint(_))));
}

#[test]
fn sr3_l1_diagonal_matches_closed_form() {
    let d = [2.0, 0.5, 1.0, 3.0];
    let y = [3.0, 0.2, -0.4, -6.0];
    let (lambda, nu) = (0.3, 1.0);
    let p = one_target(DMatrix::from_diagonal(&DVector::from_column_slice(&d)), &y);
    let spec = OptimizerSpec::Sr3 {
        threshold: lambda,
        nu,
        regularizer: Regularizer::L1,
        max_iter: 100_000,
        tol: 1e-15,
        constraints: None,
    };
    let c = solve(&p, &spec).unwrap();
    for i in 0..4 {
        let expected = soft_threshold(y[i] / d[i], lambda * (1.0 + nu * d[i] * d[i]) / (d[i] * d[i]));
        assert!((c.xi[i] - expected).abs() < 1e-10, "entry {i}: {} vs {expected}", c.xi[i]);
    }
}

#[test]
fn thresholds() {
    assert_eq!(soft_threshold(3.0, 1.0), 2.0);
    assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
    assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    assert_eq!(hard_threshold(0.5, 1.0), 0.0);
    assert_eq!(hard_threshold(-1.5, 1.0), -1.5);
}

#[test]
fn stlsq_refit_never_raises_residual() {
    for seed in 0..20 {
        let (p, _) = planted(0.3, seed);
        let prep = Prepared::new(&p);
        let out = stlsq::solve(&prep, 0.2, 0.0, 20);
        for &(thresholded, refit) in out.trace.iter().flatten() {
            assert!(refit <= thresholded * (1.0 + 1e-12) + 1e-12, "seed {seed}");
        }
    }
}

#[test]
fn rank_deficiency_is_flagged_not_fatal() {
    let mut theta = DMatrix::from_fn(10, 3, |i, j| ((i + 1) * (j + 2)) as f64 % 7.0);
    let col = theta.column(0).into_owned();
    theta.set_column(2, &col);
    let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let c = solve(&one_target(theta, &y), &OptimizerSpec::stlsq_with(0.0, 0.0)).unwrap();
    assert!(c.diagnostics.rank_deficient);
    assert!(c.xi.iter().all(|v| v.is_finite()));
}

#[test]
fn zero_columns_are_dropped_and_reported() {
    let mut theta = DMatrix::from_fn(8, 3, |i, j| (i as f64 + 1.0).powi(j as i32));
    theta.column_mut(1).fill(0.0);
    let y: Vec<f64> = (0..8).map(|i| 2.0 + 0.5 * ((i + 1) * (i + 1)) as f64).collect();
    let p = one_target(theta, &y).with_normalization(true);
    for spec in [OptimizerSpec::stlsq(), OptimizerSpec::sr3(0.1, Regularizer::L0), OptimizerSpec::ssr(), OptimizerSpec::frols()] {
        let c = solve(&p, &spec).unwrap();
        assert_eq!(c.diagnostics.dropped_columns, vec![1], "{spec}");
        assert_eq!(c.xi[1], 0.0);
    }
}

#[test]
fn empty_support_is_reported() {
    let p = one_target(DMatrix::identity(2, 2), &[0.01, 0.02]);
    let c = solve(&p, &OptimizerSpec::stlsq_with(1.0, 0.0)).unwrap();
    assert_eq!(c.diagnostics.empty_targets, vec![0]);
    assert!(!c.diagnostics.messages.is_empty());
    assert_eq!(c.nnz(), 0);
}

#[test]
fn weights_scale_rows() {
    // Doubling a row's weight equals duplicating it.
    let theta = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
    let y = [1.0, 3.0, 1.5];
    let w = one_target(theta.clone(), &y)
        .with_weights(DVector::from_column_slice(&[2.0, 1.0, 1.0]))
        .unwrap();
    let dup = one_target(
        DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]),
        &[1.0, 1.0, 3.0, 1.5],
    );
    let spec = OptimizerSpec::stlsq_with(0.0, 0.0);
    let a = solve(&w, &spec).unwrap();
    let b = solve(&dup, &spec).unwrap();
    assert!((&a.xi - &b.xi).amax() < 1e-12);
}

#[test]
fn solve_path_rejects_non_greedy() {
    let (p, _) = planted(0.0, 1);
    assert!(matches!(solve_path(&p, &OptimizerSpec::stlsq()), Err(Error::Optimizer(_))));
}

#[test]
fn parse_and_display() {
    let cases = ["stlsq:0.2,0.01", "sr3:0.1,2,l1", "ssr", "frols"];
    for s in cases {
        let spec: OptimizerSpec = s.parse().unwrap();
        assert_eq!(spec.to_string(), s);
    }
    assert_eq!("stlsq".parse::<OptimizerSpec>().unwrap(), OptimizerSpec::stlsq());
    for bad in ["", "stlsq:0.1", "sr3:1,0,l0", "sr3:1,1,l2", "lasso", "stlsq:-1,0"] {
        assert!(bad.parse::<OptimizerSpec>().is_err(), "{bad}");
    }
}

#[test]
fn spec_json_round_trip() {
    let specs = [
        OptimizerSpec::stlsq(),
        OptimizerSpec::Sr3 {
            threshold: 0.2,
            nu: 0.5,
            regularizer: Regularizer::L1,
            max_iter: 10,
            tol: 1e-6,
            constraints: Some(EqualityConstraints {
                lhs: vec![vec![1.0, 0.0]],
                rhs: vec![0.5],
            }),
        },
        OptimizerSpec::ssr(),
        OptimizerSpec::frols(),
    ];
    for s in specs {
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<OptimizerSpec>(&json).unwrap(), s);
    }
    let d: OptimizerSpec = serde_json::from_str(r#"{"type":"stlsq"}"#).unwrap();
    assert_eq!(d, OptimizerSpec::stlsq());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frols_path_residuals_non_increasing(seed in any::<u64>(), m in 6usize..30, p in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = DMatrix::from_fn(m, p, |_, _| StandardNormal.sample(&mut rng));
        let y: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let path = solve_path(&one_target(theta, &y), &OptimizerSpec::frols()).unwrap();
        for w in path.windows(2) {
            prop_assert!(w[1].residual <= w[0].residual * (1.0 + 1e-10) + 1e-12);
            prop_assert_eq!(w[1].n_terms, w[0].n_terms + 1);
        }
    }

    #[test]
    fn solvers_are_deterministic(seed in 0u64..1000) {
        let (p, _) = planted(0.2, seed);
        for spec in [OptimizerSpec::stlsq(), OptimizerSpec::sr3(0.1, Regularizer::L1), OptimizerSpec::ssr(), OptimizerSpec::frols()] {
            prop_assert_eq!(solve(&p, &spec).unwrap(), solve(&p, &spec).unwrap());
        }
    }
}
