//! Sampling grids, datasets and the stacked sample matrices built from them.
//!
//! A [`Dataset`] stores states as an array of shape
//! `(spatial axes..., time, n_states)`. Flattening produces one row per
//! sample, ordered lexicographically by spatial index and then by time, so
//! the rows belonging to one spatial point are contiguous in time.

mod io;

pub use io::{load_csv, load_dataset, load_dir, save_csv, save_dir};

use nalgebra::DMatrix;
use ndarray::{ArrayD, Axis as NdAxis, IxDyn, Slice};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used to classify an axis as uniformly spaced.
pub const UNIFORM_TOL: f64 = 1e-10;

/// Name reserved for the time axis.
pub const TIME_AXIS: &str = "t";

/// One strictly increasing coordinate axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    name: String,
    values: Vec<f64>,
    uniform: bool,
    periodic: bool,
}

impl Axis {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.len() < 2 {
            return Err(Error::Grid(format!(
                "axis `{name}` has {} points, need at least 2",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Grid(format!("axis `{name}` has non-finite values")));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid(format!("axis `{name}` is not strictly increasing")));
        }
        let uniform = is_uniform(&values);
        Ok(Self {
            name,
            values,
            uniform,
            periodic: false,
        })
    }

    /// `count` points `start + i * step`.
    pub fn linspace(name: impl Into<String>, start: f64, step: f64, count: usize) -> Result<Self> {
        let values = (0..count).map(|i| start + step * i as f64).collect();
        Self::new(name, values)
    }

    /// Marks the axis as periodic (the last point is not repeated).
    pub fn with_periodic(mut self, periodic: bool) -> Self {
        self.periodic = periodic;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// Mean spacing between consecutive points.
    pub fn mean_spacing(&self) -> f64 {
        let n = self.values.len();
        (self.values[n - 1] - self.values[0]) / (n - 1) as f64
    }

    fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        Ok(Self::new(self.name.clone(), self.values[range].to_vec())?.with_periodic(false))
    }
}

fn is_uniform(values: &[f64]) -> bool {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for w in values.windows(2) {
        let d = w[1] - w[0];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let mean = (values[values.len() - 1] - values[0]) / (values.len() - 1) as f64;
    (hi - lo) / mean <= UNIFORM_TOL
}

/// Identifies an axis of a [`Grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisId {
    Time,
    Spatial(usize),
}

/// Time axis plus zero or more spatial axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    spatial: Vec<Axis>,
    time: Axis,
}

impl Grid {
    pub fn new(spatial: Vec<Axis>, time: Axis) -> Result<Self> {
        let mut names: Vec<&str> = spatial.iter().map(Axis::name).collect();
        names.push(time.name());
        let mut sorted = names.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(Error::Grid(format!("duplicate axis names in {names:?}")));
        }
        Ok(Self { spatial, time })
    }

    /// A grid with only a time axis.
    pub fn temporal(times: Vec<f64>) -> Result<Self> {
        Self::new(Vec::new(), Axis::new(TIME_AXIS, times)?)
    }

    pub fn time(&self) -> &Axis {
        &self.time
    }

    pub fn spatial(&self) -> &[Axis] {
        &self.spatial
    }

    pub fn axis(&self, id: AxisId) -> &Axis {
        match id {
            AxisId::Time => &self.time,
            AxisId::Spatial(i) => &self.spatial[i],
        }
    }

    pub fn find(&self, name: &str) -> Option<AxisId> {
        if self.time.name() == name {
            return Some(AxisId::Time);
        }
        self.spatial
            .iter()
            .position(|a| a.name() == name)
            .map(AxisId::Spatial)
    }

    /// Array dimension index that corresponds to `id`.
    pub fn dim_of(&self, id: AxisId) -> usize {
        match id {
            AxisId::Time => self.spatial.len(),
            AxisId::Spatial(i) => i,
        }
    }

    /// Sample dimensions `(spatial..., time)`.
    pub fn shape(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.spatial.iter().map(Axis::len).collect();
        s.push(self.time.len());
        s
    }

    pub fn n_samples(&self) -> usize {
        self.shape().iter().product()
    }

    fn with_time(&self, time: Axis) -> Self {
        Self {
            spatial: self.spatial.clone(),
            time,
        }
    }
}

/// Measured states on a grid, with optional controls and precomputed time derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    grid: Grid,
    states: ArrayD<f64>,
    controls: Option<ArrayD<f64>>,
    derivatives: Option<ArrayD<f64>>,
    allow_missing: bool,
}

impl Dataset {
    pub fn new(grid: Grid, states: ArrayD<f64>) -> Result<Self> {
        Self::build(grid, states, false)
    }

    /// Like [`Dataset::new`] but tolerates NaN entries; such samples are
    /// dropped when flattening.
    pub fn new_allow_missing(grid: Grid, states: ArrayD<f64>) -> Result<Self> {
        Self::build(grid, states, true)
    }

    fn build(grid: Grid, states: ArrayD<f64>, allow_missing: bool) -> Result<Self> {
        check_sample_shape(&grid, &states, "states")?;
        if states.shape()[states.ndim() - 1] == 0 {
            return Err(Error::Shape("dataset needs at least one state variable".into()));
        }
        check_finite(&states, allow_missing, "states")?;
        Ok(Self {
            grid,
            states: states.as_standard_layout().into_owned(),
            controls: None,
            derivatives: None,
            allow_missing,
        })
    }

    /// Build a trajectory dataset from a `T x n` matrix of samples.
    pub fn from_trajectory(times: Vec<f64>, states: &DMatrix<f64>) -> Result<Self> {
        let grid = Grid::temporal(times)?;
        let arr = matrix_to_array(states, &grid.shape())?;
        Self::new(grid, arr)
    }

    pub fn with_controls(mut self, controls: ArrayD<f64>) -> Result<Self> {
        check_sample_shape(&self.grid, &controls, "controls")?;
        check_finite(&controls, self.allow_missing, "controls")?;
        self.controls = Some(controls.as_standard_layout().into_owned());
        Ok(self)
    }

    pub fn with_derivatives(mut self, derivatives: ArrayD<f64>) -> Result<Self> {
        if derivatives.shape() != self.states.shape() {
            return Err(Error::Shape(format!(
                "derivatives shape {:?} differs from states shape {:?}",
                derivatives.shape(),
                self.states.shape()
            )));
        }
        check_finite(&derivatives, self.allow_missing, "derivatives")?;
        self.derivatives = Some(derivatives.as_standard_layout().into_owned());
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn states(&self) -> &ArrayD<f64> {
        &self.states
    }

    pub fn controls(&self) -> Option<&ArrayD<f64>> {
        self.controls.as_ref()
    }

    pub fn derivatives(&self) -> Option<&ArrayD<f64>> {
        self.derivatives.as_ref()
    }

    pub fn allows_missing(&self) -> bool {
        self.allow_missing
    }

    pub fn n_states(&self) -> usize {
        self.states.shape()[self.states.ndim() - 1]
    }

    pub fn n_controls(&self) -> usize {
        self.controls
            .as_ref()
            .map_or(0, |c| c.shape()[c.ndim() - 1])
    }

    pub fn n_samples(&self) -> usize {
        self.grid.n_samples()
    }

    /// Stack samples into row matrices. See the module docs for row order.
    pub fn flatten(&self) -> Flattened {
        let states = array_to_matrix(&self.states);
        let controls = self.controls.as_ref().map(array_to_matrix);
        let m = states.nrows();
        let keep: Vec<usize> = if self.allow_missing {
            (0..m)
                .filter(|&i| {
                    !states.row(i).iter().any(|v| v.is_nan())
                        && !controls
                            .as_ref()
                            .is_some_and(|c| c.row(i).iter().any(|v| v.is_nan()))
                })
                .collect()
        } else {
            (0..m).collect()
        };
        let index = SampleIndex {
            sample_shape: self.grid.shape(),
            rows: keep,
        };
        if index.rows.len() == m {
            return Flattened {
                states,
                controls,
                index,
            };
        }
        Flattened {
            states: index.select(&states),
            controls: controls.map(|c| index.select(&c)),
            index,
        }
    }

    /// Time samples `range` of this dataset (all spatial points).
    pub fn time_slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let time = self.grid.time.slice(range.clone())?;
        let dim = self.grid.dim_of(AxisId::Time);
        let cut = |a: &ArrayD<f64>| {
            a.slice_axis(NdAxis(dim), Slice::from(range.clone()))
                .as_standard_layout()
                .into_owned()
        };
        Ok(Self {
            grid: self.grid.with_time(time),
            states: cut(&self.states),
            controls: self.controls.as_ref().map(cut),
            derivatives: self.derivatives.as_ref().map(cut),
            allow_missing: self.allow_missing,
        })
    }

    /// Copy with the states replaced (same shape).
    pub fn with_states(&self, states: ArrayD<f64>) -> Result<Self> {
        if states.shape() != self.states.shape() {
            return Err(Error::Shape("replacement states differ in shape".into()));
        }
        check_finite(&states, self.allow_missing, "states")?;
        let mut out = self.clone();
        out.states = states.as_standard_layout().into_owned();
        Ok(out)
    }

    /// Restrict the state variables to `indices` (controls and derivatives follow).
    pub fn select_states(&self, indices: &[usize]) -> Result<Self> {
        let n = self.n_states();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Shape(format!("state index {bad} out of range (n = {n})")));
        }
        let last = NdAxis(self.states.ndim() - 1);
        let mut out = self.clone();
        out.states = self.states.select(last, indices);
        out.derivatives = self.derivatives.as_ref().map(|d| d.select(last, indices));
        Ok(out)
    }
}

fn check_sample_shape(grid: &Grid, arr: &ArrayD<f64>, what: &str) -> Result<()> {
    let expected = grid.shape();
    let shape = arr.shape();
    if shape.len() != expected.len() + 1 || shape[..expected.len()] != expected[..] {
        return Err(Error::Shape(format!(
            "{what} shape {shape:?} does not match grid shape {expected:?} + [variables]"
        )));
    }
    Ok(())
}

fn check_finite(arr: &ArrayD<f64>, allow_nan: bool, what: &str) -> Result<()> {
    let bad = arr
        .iter()
        .any(|v| if allow_nan { v.is_infinite() } else { !v.is_finite() });
    if bad {
        return Err(Error::NonFinite(what.into()));
    }
    Ok(())
}

/// Row-stacked samples together with the map back to grid positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Flattened {
    pub states: DMatrix<f64>,
    pub controls: Option<DMatrix<f64>>,
    pub index: SampleIndex,
}

/// Maps flattened rows back to grid sample positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleIndex {
    sample_shape: Vec<usize>,
    rows: Vec<usize>,
}

impl SampleIndex {
    /// Index covering every sample of `shape` with no dropped rows.
    pub fn full(sample_shape: Vec<usize>) -> Self {
        let n = sample_shape.iter().product();
        Self {
            sample_shape,
            rows: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.rows.len() == self.sample_shape.iter().product::<usize>()
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.sample_shape
    }

    /// Linear sample index of each row.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Grid multi-index `(spatial..., time)` of `row`.
    pub fn multi_index(&self, row: usize) -> Vec<usize> {
        let mut lin = self.rows[row];
        let mut idx = vec![0; self.sample_shape.len()];
        for (d, &len) in self.sample_shape.iter().enumerate().rev() {
            idx[d] = lin % len;
            lin /= len;
        }
        idx
    }

    /// Pick the kept rows out of a full `n_samples x k` matrix.
    pub fn select(&self, full: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), full.ncols(), |i, j| full[(self.rows[i], j)])
    }

    /// Inverse of flattening: scatter rows into an array of shape
    /// `sample_shape + [k]`; dropped samples are NaN.
    pub fn unflatten(&self, mat: &DMatrix<f64>) -> Result<ArrayD<f64>> {
        if mat.nrows() != self.rows.len() {
            return Err(Error::Shape(format!(
                "matrix has {} rows, index has {}",
                mat.nrows(),
                self.rows.len()
            )));
        }
        let k = mat.ncols();
        let total: usize = self.sample_shape.iter().product();
        let mut data = vec![f64::NAN; total * k];
        for (i, &r) in self.rows.iter().enumerate() {
            for j in 0..k {
                data[r * k + j] = mat[(i, j)];
            }
        }
        let mut shape = self.sample_shape.clone();
        shape.push(k);
        ArrayD::from_shape_vec(IxDyn(&shape), data).map_err(|e| Error::Shape(e.to_string()))
    }
}

/// `(samples..., k)` array to a `n_samples x k` matrix in flattening order.
pub fn array_to_matrix(arr: &ArrayD<f64>) -> DMatrix<f64> {
    let k = arr.shape()[arr.ndim() - 1];
    let m = if k == 0 { 0 } else { arr.len() / k };
    let std = arr.as_standard_layout();
    let slice = std.as_slice().expect("standard layout");
    DMatrix::from_row_slice(m, k, slice)
}

/// Inverse of [`array_to_matrix`] for a given sample shape.
pub fn matrix_to_array(mat: &DMatrix<f64>, sample_shape: &[usize]) -> Result<ArrayD<f64>> {
    let mut shape = sample_shape.to_vec();
    shape.push(mat.ncols());
    let data: Vec<f64> = (0..mat.nrows())
        .flat_map(|i| mat.row(i).iter().copied().collect::<Vec<_>>())
        .collect();
    ArrayD::from_shape_vec(IxDyn(&shape), data).map_err(|e| Error::Shape(e.to_string()))
}

/// Split along time: the first `floor(fraction * T)` samples train, the rest test.
pub fn split_train_test(dataset: &Dataset, fraction: f64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::param("fraction", "must lie in (0, 1)"));
    }
    let t = dataset.grid().time().len();
    let n_train = (fraction * t as f64).floor() as usize;
    if n_train < 2 || t - n_train < 2 {
        return Err(Error::Sizing(format!(
            "fraction {fraction} of {t} time samples leaves {n_train} train / {} test, need >= 2 each",
            t - n_train
        )));
    }
    Ok((dataset.time_slice(0..n_train)?, dataset.time_slice(n_train..t)?))
}

/// How the noise standard deviation is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScale {
    /// `sigma = level * RMS(states)`.
    #[default]
    Relative,
    /// `sigma = level`.
    Absolute,
}

/// Add seeded i.i.d. Gaussian noise with `sigma = level * RMS(states)`.
pub fn add_noise(dataset: &Dataset, level: f64, seed: u64) -> Result<Dataset> {
    add_noise_scaled(dataset, level, seed, NoiseScale::Relative)
}

pub fn add_noise_scaled(
    dataset: &Dataset,
    level: f64,
    seed: u64,
    scale: NoiseScale,
) -> Result<Dataset> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::param("level", "noise level must be finite and >= 0"));
    }
    if level == 0.0 {
        return Ok(dataset.clone());
    }
    let sigma = match scale {
        NoiseScale::Relative => level * rms(dataset.states().iter().copied()),
        NoiseScale::Absolute => level,
    };
    if sigma == 0.0 {
        return Ok(dataset.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::param("level", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = dataset.states().clone();
    for v in states.iter_mut() {
        *v += normal.sample(&mut rng);
    }
    let mut out = dataset.clone();
    out.states = states;
    Ok(out)
}

/// Root mean square of the finite values.
pub fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values.filter(|v| v.is_finite()) {
        sum += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Several datasets sharing state and control dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCollection {
    datasets: Vec<Dataset>,
}

impl TrajectoryCollection {
    pub fn new(datasets: Vec<Dataset>) -> Result<Self> {
        let first = datasets
            .first()
            .ok_or_else(|| Error::Shape("trajectory collection is empty".into()))?;
        let (n, r) = (first.n_states(), first.n_controls());
        for (i, d) in datasets.iter().enumerate() {
            if d.n_states() != n || d.n_controls() != r {
                return Err(Error::Shape(format!(
                    "trajectory {i} has (n, r) = ({}, {}), expected ({n}, {r})",
                    d.n_states(),
                    d.n_controls()
                )));
            }
        }
        Ok(Self { datasets })
    }

    pub fn single(dataset: Dataset) -> Self {
        Self {
            datasets: vec![dataset],
        }
    }

    pub fn datasets(&self) -> &[Dataset] {
        &self.datasets
    }

    pub fn n_states(&self) -> usize {
        self.datasets[0].n_states()
    }

    pub fn n_controls(&self) -> usize {
        self.datasets[0].n_controls()
    }
}

impl From<Dataset> for TrajectoryCollection {
    fn from(d: Dataset) -> Self {
        Self::single(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;

    fn field_2x2() -> Dataset {
        let grid = Grid::new(
            vec![Axis::new("x", vec![0.0, 1.0]).unwrap()],
            Axis::new("t", vec![0.0, 1.0]).unwrap(),
        )
        .unwrap();
        let states = Array::from_shape_fn(IxDyn(&[2, 2, 1]), |ix| 10.0 * ix[0] as f64 + ix[1] as f64);
        Dataset::new(grid, states).unwrap()
    }

    #[test]
    fn flatten_single_point() {
        let d = Dataset::from_trajectory(
            vec![0.0, 1.0, 2.0],
            &DMatrix::from_column_slice(3, 1, &[5.0, 6.0, 7.0]),
        )
        .unwrap();
        let f = d.flatten();
        assert_eq!(f.states.as_slice(), &[5.0, 6.0, 7.0]);
        assert!(f.controls.is_none());
    }

    #[test]
    fn flatten_is_time_major_within_point() {
        let f = field_2x2().flatten();
        assert_eq!(f.states.as_slice(), &[0.0, 1.0, 10.0, 11.0]);
        assert_eq!(f.index.multi_index(2), vec![1, 0]);
    }

    #[test]
    fn uniform_flag() {
        assert!(Axis::linspace("t", 0.0, 0.1, 50).unwrap().is_uniform());
        assert!(!Axis::new("t", vec![0.0, 1.0, 2.5]).unwrap().is_uniform());
    }

    #[test]
    fn axis_rejects_bad_values() {
        assert!(Axis::new("t", vec![0.0]).is_err());
        assert!(Axis::new("t", vec![0.0, 0.0, 1.0]).is_err());
        assert!(Axis::new("t", vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let grid = Grid::temporal(vec![0.0, 1.0, 2.0]).unwrap();
        assert!(Dataset::new(grid, ArrayD::zeros(IxDyn(&[4, 1]))).is_err());
    }

    #[test]
    fn nan_rejected_unless_allowed() {
        let grid = Grid::temporal(vec![0.0, 1.0, 2.0]).unwrap();
        let mut s = ArrayD::zeros(IxDyn(&[3, 2]));
        s[[1, 0]] = f64::NAN;
        assert!(matches!(
            Dataset::new(grid.clone(), s.clone()),
            Err(Error::NonFinite(_))
        ));
        let d = Dataset::new_allow_missing(grid, s).unwrap();
        let f = d.flatten();
        assert_eq!(f.states.nrows(), 2);
        assert_eq!(f.index.rows(), &[0, 2]);
        let back = f.index.unflatten(&f.states).unwrap();
        assert!(back[[1, 0]].is_nan() && back[[1, 1]].is_nan());
    }

    #[test]
    fn split_sizes() {
        let mk = |t: usize| {
            let times = (0..t).map(|i| i as f64).collect();
            Dataset::from_trajectory(times, &DMatrix::zeros(t, 1)).unwrap()
        };
        let (a, b) = split_train_test(&mk(251), 0.6).unwrap();
        assert_eq!((a.grid().time().len(), b.grid().time().len()), (150, 101));
        let (a, b) = split_train_test(&mk(10), 0.5).unwrap();
        assert_eq!((a.grid().time().len(), b.grid().time().len()), (5, 5));
        assert!(matches!(split_train_test(&mk(4), 0.9), Err(Error::Sizing(_))));
        assert!(split_train_test(&mk(10), 1.0).is_err());
    }

    #[test]
    fn split_is_partition() {
        let d = field_2x2();
        let times: Vec<f64> = (0..7).map(|i| 0.5 * i as f64).collect();
        let grid = Grid::new(d.grid().spatial().to_vec(), Axis::new("t", times.clone()).unwrap()).unwrap();
        let states = Array::from_shape_fn(IxDyn(&[2, 7, 1]), |ix| (ix[0] * 7 + ix[1]) as f64);
        let d = Dataset::new(grid, states.clone()).unwrap();
        let (a, b) = split_train_test(&d, 0.5).unwrap();
        let mut joined = a.grid().time().values().to_vec();
        joined.extend_from_slice(b.grid().time().values());
        assert_eq!(joined, times);
        let cat = ndarray::concatenate(NdAxis(1), &[a.states().view(), b.states().view()]).unwrap();
        assert_eq!(cat, states);
    }

    #[test]
    fn noise_zero_level_and_determinism() {
        let d = field_2x2();
        assert_eq!(add_noise(&d, 0.0, 3).unwrap(), d);
        assert_eq!(add_noise(&d, 0.1, 3).unwrap(), add_noise(&d, 0.1, 3).unwrap());
        assert_ne!(add_noise(&d, 0.1, 3).unwrap(), add_noise(&d, 0.1, 4).unwrap());
        assert!(add_noise(&d, -0.1, 3).is_err());
    }

    #[test]
    fn noise_std_matches_level() {
        // Unit-RMS signal: alternating +-1.
        let t = 20_000;
        let mat = DMatrix::from_fn(t, 1, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        let d = Dataset::from_trajectory((0..t).map(|i| i as f64).collect(), &mat).unwrap();
        let noisy = add_noise(&d, 0.1, 11).unwrap();
        let diff: Vec<f64> = noisy
            .states()
            .iter()
            .zip(d.states().iter())
            .map(|(a, b)| a - b)
            .collect();
        let mean = diff.iter().sum::<f64>() / t as f64;
        let var = diff.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1) as f64;
        let std = var.sqrt();
        assert!((std - 0.1).abs() / 0.1 < 0.05, "std = {std}");
    }

    #[test]
    fn absolute_noise_scale() {
        let d = field_2x2();
        let a = add_noise_scaled(&d, 0.5, 1, NoiseScale::Absolute).unwrap();
        let r = add_noise_scaled(&d, 0.5, 1, NoiseScale::Relative).unwrap();
        assert_ne!(a, r);
    }

    #[test]
    fn collection_checks_dimensions() {
        let a = Dataset::from_trajectory(vec![0.0, 1.0], &DMatrix::zeros(2, 2)).unwrap();
        let b = Dataset::from_trajectory(vec![0.0, 1.0], &DMatrix::zeros(2, 3)).unwrap();
        assert!(TrajectoryCollection::new(vec![]).is_err());
        assert!(TrajectoryCollection::new(vec![a.clone(), b]).is_err());
        assert!(TrajectoryCollection::new(vec![a.clone(), a]).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn flatten_roundtrip(vals in proptest::collection::vec(-1e3f64..1e3, 24)) {
                let grid = Grid::new(
                    vec![Axis::linspace("x", 0.0, 1.0, 3).unwrap()],
                    Axis::linspace("t", 0.0, 0.5, 4).unwrap(),
                ).unwrap();
                let states = ArrayD::from_shape_vec(IxDyn(&[3, 4, 2]), vals).unwrap();
                let d = Dataset::new(grid, states.clone()).unwrap();
                let f = d.flatten();
                prop_assert_eq!(f.index.unflatten(&f.states).unwrap(), states);
            }
        }
    }
}
