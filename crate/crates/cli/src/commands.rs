use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::DMatrix;

use sindy_core::data::{load_dataset, save_csv, save_dir, split_train_test, Dataset, TrajectoryCollection};
use sindy_core::diff::DiffMethod;
use sindy_core::ensemble::EnsembleSpec;
use sindy_core::model::{target_names, FittedModel, Metric, Sindy};
use sindy_core::optimize::OptimizerSpec;
use sindy_core::systems::generate as generate_benchmark;

use crate::config::{read_json, DiscoveryConfig, GenerateConfig, SCHEMA};
use crate::error::{CliError, CliResult};
use crate::output::Staging;
use crate::report::{rows, to_json, FitReport, ModelInfo, ScoreReport, ScoreSummary, TruthReport};

pub const REPORT_FILE: &str = "report.json";
pub const EQUATIONS_FILE: &str = "equations.txt";
pub const PREDICTIONS_FILE: &str = "prediction_vs_truth.csv";
pub const TRUTH_FILE: &str = "truth.json";
pub const SCORE_FILE: &str = "score.json";
/// Equations in `truth.json` use this many significant digits.
const TRUTH_PRECISION: usize = 6;

fn output_dir(flag: Option<&Path>, config: Option<&PathBuf>, base: &Path) -> CliResult<PathBuf> {
    match (flag, config) {
        (Some(p), _) => Ok(p.to_path_buf()),
        (None, Some(p)) => Ok(base.join(p)),
        (None, None) => Err(CliError::Config("no output directory: pass --out or set `output`".into())),
    }
}

fn config_base(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Writes a benchmark dataset and its `truth.json` into the output directory.
pub fn generate(config: &Path, out: Option<&Path>, seed: Option<u64>) -> CliResult<PathBuf> {
    let mut cfg: GenerateConfig = read_json(config)?;
    if let Some(s) = seed {
        cfg.benchmark = cfg.benchmark.with_seed(s);
    }
    cfg.validate()?;
    let dest = output_dir(out, cfg.output.as_ref(), &config_base(config))?;
    let bench = generate_benchmark(&cfg.benchmark).map_err(CliError::fit)?;
    info!(
        "generated {:?} samples x {} states",
        bench.dataset.grid().shape(),
        bench.dataset.n_states()
    );
    let n = bench.dataset.n_states();
    let targets = target_names(n);
    let truth = TruthReport {
        schema: SCHEMA,
        library: bench.library.clone(),
        feature_names: bench.truth.names.clone(),
        target_names: targets.clone(),
        coefficients: rows(&bench.truth.xi),
        equations: sindy_core::model::equations(&bench.truth.xi, &bench.truth.names, &targets, TRUTH_PRECISION),
    };
    let staging = Staging::new(&dest)?;
    save_dir(&bench.dataset, staging.path()).map_err(CliError::output)?;
    if bench.dataset.grid().spatial().is_empty() {
        save_csv(&bench.dataset, &staging.path().join("data.csv")).map_err(CliError::output)?;
    }
    staging.write(TRUTH_FILE, to_json(&truth))?;
    staging.commit()?;
    Ok(dest)
}

/// Command-line replacements for config entries.
#[derive(Debug, Clone, Default)]
pub struct FitOverrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub diff: Option<String>,
    pub optimizer: Option<String>,
    pub ensemble: Option<String>,
}

pub fn load_fit_config(path: &Path, over: &FitOverrides) -> CliResult<DiscoveryConfig> {
    let mut cfg: DiscoveryConfig = read_json(path)?;
    if let Some(d) = &over.diff {
        cfg.diff = d.parse::<DiffMethod>().map_err(CliError::config)?;
    }
    if let Some(o) = &over.optimizer {
        cfg.optimizer = o.parse::<OptimizerSpec>().map_err(CliError::config)?;
    }
    if let Some(e) = &over.ensemble {
        cfg.ensemble = Some(e.parse::<EnsembleSpec>().map_err(CliError::config)?);
    }
    if over.seed.is_some() {
        cfg.seed = over.seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_data(cfg: &DiscoveryConfig, base: &Path) -> CliResult<Dataset> {
    if let Some(b) = &cfg.benchmark {
        return generate_benchmark(b).map(|b| b.dataset).map_err(CliError::data);
    }
    let path = base.join(cfg.dataset.as_ref().expect("validated"));
    let ds = load_dataset(&path).map_err(CliError::data)?;
    if ds.n_samples() == 0 || ds.n_states() == 0 {
        return Err(CliError::Data(format!("{} holds no samples", path.display())));
    }
    Ok(ds)
}

/// Predicted and computed targets, one row per sample.
pub fn predictions_csv(model: &FittedModel, data: &Dataset) -> CliResult<String> {
    let (pred, truth) = model.prediction_pairs(data).map_err(CliError::fit)?;
    Ok(pairs_csv(&model.target_names, &pred, &truth))
}

fn pairs_csv(targets: &[String], pred: &DMatrix<f64>, truth: &DMatrix<f64>) -> String {
    let mut s = String::from("sample");
    for t in targets {
        let _ = write!(s, ",{t}_predicted,{t}_computed");
    }
    s.push('\n');
    for i in 0..pred.nrows() {
        let _ = write!(s, "{i}");
        for j in 0..pred.ncols() {
            let _ = write!(s, ",{},{}", pred[(i, j)], truth[(i, j)]);
        }
        s.push('\n');
    }
    s
}

fn try_score(model: &FittedModel, data: &Dataset, metric: Metric) -> Option<f64> {
    match model.score(data, metric) {
        Ok(v) => Some(v),
        Err(e) => {
            warn!("score unavailable: {e}");
            None
        }
    }
}

pub struct FitOutcome {
    pub dir: PathBuf,
    pub report: FitReport,
}

/// Fits the configured model and writes `report.json`, `equations.txt` and
/// `prediction_vs_truth.csv`. On a fit error only a failure report is written.
pub fn fit(config: &Path, over: &FitOverrides) -> CliResult<FitOutcome> {
    let cfg = load_fit_config(config, over)?;
    let base = config_base(config);
    let dest = output_dir(over.out.as_deref(), cfg.output.as_ref(), &base)?;
    let metric = cfg.metric()?;
    let library = cfg.library();

    let data = load_data(&cfg, &base)?;
    let (n, r) = (data.n_states(), data.n_controls());
    library.validate(n + r).map_err(CliError::config)?;
    let (train, test) = if cfg.train_fraction < 1.0 {
        let (a, b) = split_train_test(&data, cfg.train_fraction).map_err(CliError::data)?;
        (a, Some(b))
    } else {
        (data, None)
    };

    let info = ModelInfo {
        library: library.clone(),
        diff: cfg.diff,
        optimizer: cfg.optimizer.clone(),
        normalize: cfg.normalize,
        n_states: n,
        n_controls: r,
    };
    let mut sindy = Sindy::new(library, cfg.diff, cfg.optimizer.clone()).with_normalization(cfg.normalize);
    sindy.ensemble = cfg.ensemble();
    let model = match sindy.fit(&TrajectoryCollection::single(train.clone())) {
        Ok(m) => m,
        Err(e) => {
            let report = FitReport::failure(info, e.to_string());
            let staging = Staging::new(&dest)?;
            staging.write(REPORT_FILE, to_json(&report))?;
            staging.commit()?;
            return Err(CliError::fit(e));
        }
    };
    for line in model.equations(cfg.precision) {
        info!("{line}");
    }
    for m in &model.coefficients.diagnostics.messages {
        warn!("{m}");
    }

    let score = ScoreSummary {
        metric: metric.to_string(),
        train: try_score(&model, &train, metric),
        test: test.as_ref().and_then(|t| try_score(&model, t, metric)),
    };
    let report = FitReport::success(&model, info, cfg.precision, score);
    let csv = predictions_csv(&model, test.as_ref().unwrap_or(&train))?;
    let mut equations = model.equations(cfg.precision).join("\n");
    equations.push('\n');

    let staging = Staging::new(&dest)?;
    staging.write(REPORT_FILE, to_json(&report))?;
    staging.write(EQUATIONS_FILE, equations)?;
    staging.write(PREDICTIONS_FILE, csv)?;
    staging.commit()?;
    Ok(FitOutcome { dir: dest, report })
}

/// Scores a saved report on a dataset. With `split` only the time samples
/// after that leading fraction are used.
pub fn score(
    report: &Path,
    data: &Path,
    metric: Metric,
    split: Option<f64>,
    out: Option<&Path>,
) -> CliResult<ScoreReport> {
    let report: FitReport = read_json(report)?;
    let model = report.to_model()?;
    let mut ds = load_dataset(data).map_err(CliError::data)?;
    if let Some(f) = split {
        ds = split_train_test(&ds, f).map_err(CliError::config)?.1;
    }
    if ds.n_states() != model.n_states || ds.n_controls() != model.n_controls {
        return Err(CliError::Config(format!(
            "report model has {} states and {} controls, dataset has {} and {}",
            model.n_states,
            model.n_controls,
            ds.n_states(),
            ds.n_controls()
        )));
    }
    let (pred, truth) = model.prediction_pairs(&ds).map_err(CliError::config)?;
    let value = metric.compute(&pred, &truth).map_err(CliError::fit)?;
    let result = ScoreReport {
        schema: SCHEMA,
        metric: metric.to_string(),
        value,
        n_rows: pred.nrows(),
    };
    if let Some(dir) = out {
        let staging = Staging::new(dir)?;
        staging.write(SCORE_FILE, to_json(&result))?;
        staging.commit()?;
    }
    Ok(result)
}
