//! Whole-pipeline checks through the public API.

use nalgebra::DMatrix;

use sindy_core::data::{array_to_matrix, load_csv, load_dir, save_csv, save_dir, TrajectoryCollection};
use sindy_core::diff::DiffMethod;
use sindy_core::ensemble::EnsembleSpec;
use sindy_core::model::{parse_equation, Sindy};
use sindy_core::optimize::OptimizerSpec;
use sindy_core::systems::{generate, BenchmarkSpec};

const FD6: DiffMethod = DiffMethod::FiniteDifference { order: 6 };

fn lorenz_sindy() -> (sindy_core::systems::Benchmark, Sindy) {
    let bench = generate(&BenchmarkSpec::lorenz()).unwrap();
    let sindy = Sindy::new(bench.library.clone(), FD6, OptimizerSpec::stlsq());
    (bench, sindy)
}

#[test]
fn saved_datasets_fit_identically() {
    let (bench, sindy) = lorenz_sindy();
    let direct = sindy.fit(&TrajectoryCollection::single(bench.dataset.clone())).unwrap();

    let tmp = tempfile::tempdir().unwrap();
    save_dir(&bench.dataset, &tmp.path().join("dir")).unwrap();
    let from_dir = sindy.fit(&TrajectoryCollection::single(load_dir(&tmp.path().join("dir")).unwrap())).unwrap();
    assert_eq!(direct.xi(), from_dir.xi());

    let csv = tmp.path().join("data.csv");
    save_csv(&bench.dataset, &csv).unwrap();
    let from_csv = sindy.fit(&TrajectoryCollection::single(load_csv(&csv).unwrap())).unwrap();
    assert_eq!(direct.xi(), from_csv.xi());
}

#[test]
fn recovered_lorenz_tracks_the_reference_trajectory() {
    let (bench, sindy) = lorenz_sindy();
    let model = sindy.fit(&TrajectoryCollection::single(bench.dataset.clone())).unwrap();
    let states = array_to_matrix(bench.dataset.states());
    let times: Vec<f64> = bench.dataset.grid().time().values()[..=250].to_vec();
    let initial: Vec<f64> = states.row(0).iter().copied().collect();
    let sim = model.simulate(&initial, &times, None).unwrap();
    assert!(sim.truncated.is_none());
    let reference = states.rows(0, times.len());
    let err = (&sim.states - reference).amax();
    assert!(err < 1e-4, "max deviation {err}");
}

#[test]
fn printed_equations_parse_back_to_the_model() {
    let (bench, sindy) = lorenz_sindy();
    let model = sindy.fit(&TrajectoryCollection::single(bench.dataset)).unwrap();
    let xi = model.xi();
    for (j, line) in model.equations(12).iter().enumerate() {
        let (target, terms) = parse_equation(line).unwrap();
        assert_eq!(target, model.target_names[j]);
        let mut col = DMatrix::zeros(xi.nrows(), 1);
        for (c, name) in terms {
            let i = model.feature_names.iter().position(|f| *f == name).unwrap();
            col[i] = c;
        }
        let diff = (col - xi.column(j)).amax();
        assert!(diff < 1e-9, "{line}");
    }
}

#[test]
fn ensemble_fits_repeat_exactly() {
    let bench = generate(&BenchmarkSpec::lorenz().with_noise(0.01).with_seed(4)).unwrap();
    let data = TrajectoryCollection::single(bench.dataset);
    let sindy = Sindy::new(
        bench.library,
        DiffMethod::SavitzkyGolay { window: 41, poly_order: 3 },
        OptimizerSpec::stlsq_with(0.5, 0.05),
    )
    .with_ensemble(EnsembleSpec { seed: 11, ..EnsembleSpec::default() });
    let a = sindy.fit(&data).unwrap();
    let b = sindy.fit(&data).unwrap();
    assert_eq!(a, b);
    let e = a.ensemble.unwrap();
    assert!(e.failures.is_empty());
    assert_eq!(e.members.len(), EnsembleSpec::default().n_models);
}
