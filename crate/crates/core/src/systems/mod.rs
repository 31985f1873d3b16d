//! Reference systems with known governing equations.
//!
//! The Lorenz parameters (σ = 10, ρ = 28, β = 8/3) are the conventional
//! chaotic set. The Kuramoto–Sivashinsky defaults mimic a 1024-point,
//! 251-snapshot dataset on a periodic domain of length 100.

mod ks;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{add_noise, array_to_matrix, Axis, AxisId, Dataset, Grid};
use crate::diff::{differentiate_dataset, DiffMethod};
use crate::error::{Error, Result};
use crate::integrate::{solve_ivp, OdeOptions};
use crate::library::{evaluate, feature_names, inputs_for, LibrarySpec};
use crate::optimize::Coefficients;

pub const LORENZ_RTOL: f64 = 1e-10;
pub const LORENZ_ATOL: f64 = 1e-12;

/// A benchmark system and its sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case", deny_unknown_fields)]
pub enum BenchmarkSpec {
    Lorenz {
        #[serde(default = "d_sigma")]
        sigma: f64,
        #[serde(default = "d_rho")]
        rho: f64,
        #[serde(default = "d_beta")]
        beta: f64,
        #[serde(default = "d_lorenz_initial")]
        initial: Vec<f64>,
        #[serde(default = "d_lorenz_t_end")]
        t_end: f64,
        #[serde(default = "d_lorenz_dt")]
        dt: f64,
        /// Gaussian noise, as a fraction of the RMS of each state.
        #[serde(default)]
        noise: f64,
        #[serde(default)]
        seed: u64,
    },
    Ks {
        #[serde(default = "d_ks_length")]
        length: f64,
        #[serde(default = "d_ks_n_grid")]
        n_grid: usize,
        #[serde(default = "d_ks_n_saves")]
        n_saves: usize,
        #[serde(default = "d_ks_dt_save")]
        dt_save: f64,
        /// Internal step; must divide `dt_save`.
        #[serde(default = "d_ks_dt")]
        dt: f64,
        /// Simulated time discarded before the first snapshot.
        #[serde(default = "d_ks_burn_in")]
        burn_in: f64,
        /// The initial condition sums cosines at wavenumbers `1..=ic_modes`
        /// with seeded random phases.
        #[serde(default = "d_ks_ic_modes")]
        ic_modes: usize,
        #[serde(default)]
        noise: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn d_sigma() -> f64 {
    10.0
}
fn d_rho() -> f64 {
    28.0
}
fn d_beta() -> f64 {
    8.0 / 3.0
}
fn d_lorenz_initial() -> Vec<f64> {
    vec![-8.0, 8.0, 27.0]
}
fn d_lorenz_t_end() -> f64 {
    10.0
}
fn d_lorenz_dt() -> f64 {
    0.002
}
fn d_ks_length() -> f64 {
    100.0
}
fn d_ks_n_grid() -> usize {
    1024
}
fn d_ks_n_saves() -> usize {
    251
}
fn d_ks_dt_save() -> f64 {
    0.4
}
fn d_ks_dt() -> f64 {
    0.02
}
fn d_ks_burn_in() -> f64 {
    50.0
}
fn d_ks_ic_modes() -> usize {
    4
}

impl BenchmarkSpec {
    pub fn lorenz() -> Self {
        BenchmarkSpec::Lorenz {
            sigma: d_sigma(),
            rho: d_rho(),
            beta: d_beta(),
            initial: d_lorenz_initial(),
            t_end: d_lorenz_t_end(),
            dt: d_lorenz_dt(),
            noise: 0.0,
            seed: 0,
        }
    }

    pub fn ks() -> Self {
        BenchmarkSpec::Ks {
            length: d_ks_length(),
            n_grid: d_ks_n_grid(),
            n_saves: d_ks_n_saves(),
            dt_save: d_ks_dt_save(),
            dt: d_ks_dt(),
            burn_in: d_ks_burn_in(),
            ic_modes: d_ks_ic_modes(),
            noise: 0.0,
            seed: 0,
        }
    }

    pub fn with_noise(mut self, level: f64) -> Self {
        match &mut self {
            BenchmarkSpec::Lorenz { noise, .. } | BenchmarkSpec::Ks { noise, .. } => *noise = level,
        }
        self
    }

    pub fn with_seed(mut self, value: u64) -> Self {
        match &mut self {
            BenchmarkSpec::Lorenz { seed, .. } | BenchmarkSpec::Ks { seed, .. } => *seed = value,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, f: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(f, "must be finite and > 0"))
            }
        };
        match self {
            BenchmarkSpec::Lorenz {
                sigma,
                rho,
                beta,
                initial,
                t_end,
                dt,
                noise,
                ..
            } => {
                for (v, f) in [(*sigma, "sigma"), (*rho, "rho"), (*beta, "beta"), (*t_end, "t_end"), (*dt, "dt")] {
                    pos(v, f)?;
                }
                if initial.len() != 3 || initial.iter().any(|v| !v.is_finite()) {
                    return Err(Error::param("initial", "needs 3 finite values"));
                }
                if *t_end / *dt < 2.0 {
                    return Err(Error::param("dt", "needs at least 3 samples"));
                }
                if !(noise.is_finite() && *noise >= 0.0) {
                    return Err(Error::param("noise", "must be finite and >= 0"));
                }
            }
            BenchmarkSpec::Ks {
                length,
                n_grid,
                n_saves,
                dt_save,
                dt,
                burn_in,
                ic_modes,
                noise,
                ..
            } => {
                pos(*length, "length")?;
                pos(*dt_save, "dt_save")?;
                pos(*dt, "dt")?;
                if !n_grid.is_power_of_two() || *n_grid < 16 {
                    return Err(Error::param("n_grid", "must be a power of two >= 16"));
                }
                if *n_saves < 2 {
                    return Err(Error::param("n_saves", "must be >= 2"));
                }
                if !(burn_in.is_finite() && *burn_in >= 0.0) {
                    return Err(Error::param("burn_in", "must be finite and >= 0"));
                }
                if *ic_modes == 0 || *ic_modes >= n_grid / 3 {
                    return Err(Error::param("ic_modes", "must be in 1..n_grid/3"));
                }
                if !(noise.is_finite() && *noise >= 0.0) {
                    return Err(Error::param("noise", "must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    /// The library in which the ground truth is expressed. KS spatial
    /// derivatives are spectral since the domain is periodic.
    pub fn library(&self) -> LibrarySpec {
        match self {
            BenchmarkSpec::Lorenz { .. } => LibrarySpec::polynomial(2),
            BenchmarkSpec::Ks { .. } => ks_library(Some(DiffMethod::Spectral { filter_strength: 0.0 })),
        }
    }
}

/// `PDE(D = 4, x) × Poly(2)`, optionally with a spatial differentiation override.
pub fn ks_library(spatial: Option<DiffMethod>) -> LibrarySpec {
    LibrarySpec::Pde {
        derivative_order: 4,
        axes: vec!["x".into()],
        multiply_by: Some(Box::new(LibrarySpec::polynomial(2))),
        diff: spatial,
    }
}

/// Generated data with its governing equations.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub dataset: Dataset,
    pub library: LibrarySpec,
    pub truth: Coefficients,
    /// Largest imaginary residue after inverse transforms (spectral solvers).
    pub max_imag: f64,
}

fn truth_matrix(library: &LibrarySpec, n: usize, entries: &[(&str, usize, f64)]) -> Result<Coefficients> {
    let names = feature_names(library, &inputs_for(n, 0))?;
    let mut xi = DMatrix::zeros(names.len(), n);
    for &(name, target, value) in entries {
        let i = names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownFeature(name.into()))?;
        xi[(i, target)] = value;
    }
    Ok(Coefficients::from_xi(xi, names))
}

pub fn lorenz_rhs(sigma: f64, rho: f64, beta: f64) -> impl Fn(f64, &[f64], &mut [f64]) {
    move |_, y, dy| {
        dy[0] = sigma * (y[1] - y[0]);
        dy[1] = y[0] * (rho - y[2]) - y[1];
        dy[2] = y[0] * y[1] - beta * y[2];
    }
}

/// Lorenz trajectory sampled at `times` (tight tolerances).
pub fn lorenz_trajectory(sigma: f64, rho: f64, beta: f64, initial: &[f64], times: &[f64]) -> Result<DMatrix<f64>> {
    let opts = OdeOptions {
        rtol: LORENZ_RTOL,
        atol: LORENZ_ATOL,
        ..Default::default()
    };
    let sol = solve_ivp(lorenz_rhs(sigma, rho, beta), initial, times, &opts)?;
    if let Some(msg) = sol.truncated {
        return Err(Error::Integration(msg));
    }
    Ok(DMatrix::from_fn(times.len(), 3, |i, j| sol.states[i][j]))
}

pub fn generate(spec: &BenchmarkSpec) -> Result<Benchmark> {
    spec.validate()?;
    match spec {
        BenchmarkSpec::Lorenz {
            sigma,
            rho,
            beta,
            initial,
            t_end,
            dt,
            noise,
            seed,
        } => {
            let count = (t_end / dt).round() as usize + 1;
            let times: Vec<f64> = (0..count).map(|i| i as f64 * dt).collect();
            let states = lorenz_trajectory(*sigma, *rho, *beta, initial, &times)?;
            let mut dataset = Dataset::from_trajectory(times, &states)?;
            if *noise > 0.0 {
                dataset = add_noise(&dataset, *noise, *seed)?;
            }
            let library = spec.library();
            let truth = truth_matrix(
                &library,
                3,
                &[
                    ("q0", 0, -sigma),
                    ("q1", 0, *sigma),
                    ("q0", 1, *rho),
                    ("q1", 1, -1.0),
                    ("q0 q2", 1, -1.0),
                    ("q0 q1", 2, 1.0),
                    ("q2", 2, -beta),
                ],
            )?;
            Ok(Benchmark {
                dataset,
                library,
                truth,
                max_imag: 0.0,
            })
        }
        BenchmarkSpec::Ks {
            length,
            n_grid,
            n_saves,
            dt_save,
            dt,
            burn_in,
            ic_modes,
            noise,
            seed,
        } => {
            let xs: Vec<f64> = (0..*n_grid).map(|i| length * i as f64 / *n_grid as f64).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let phases: Vec<f64> = (0..*ic_modes).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            let u0: Vec<f64> = xs
                .iter()
                .map(|x| {
                    phases
                        .iter()
                        .enumerate()
                        .map(|(m, ph)| (2.0 * PI * (m + 1) as f64 * x / length + ph).cos())
                        .sum()
                })
                .collect();
            let (snaps, max_imag) = ks::integrate(&u0, *length, *dt, *dt_save, *burn_in, *n_saves)?;
            let times: Vec<f64> = (0..*n_saves).map(|i| i as f64 * dt_save).collect();
            let grid = Grid::new(
                vec![Axis::new("x", xs)?.with_periodic(true)],
                Axis::new("t", times)?,
            )?;
            let states = ArrayD::from_shape_fn(IxDyn(&[*n_grid, *n_saves, 1]), |ix| snaps[ix[1]][ix[0]]);
            let mut dataset = Dataset::new(grid, states)?;
            if *noise > 0.0 {
                dataset = add_noise(&dataset, *noise, *seed)?;
            }
            let library = spec.library();
            let truth = truth_matrix(
                &library,
                1,
                &[("q0 q0_x", 0, -1.0), ("q0_xx", 0, -1.0), ("q0_xxxx", 0, -1.0)],
            )?;
            Ok(Benchmark {
                dataset,
                library,
                truth,
                max_imag,
            })
        }
    }
}

/// Relative RMS of `Q_t - Θ Ξ_truth` against `Q_t`; 1 for a zero truth.
pub fn verify_residual(dataset: &Dataset, truth: &Coefficients, library: &LibrarySpec, diff: DiffMethod) -> Result<f64> {
    let fm = evaluate(library, dataset, diff)?;
    if fm.width() != truth.xi.nrows() || dataset.n_states() != truth.xi.ncols() {
        return Err(Error::Shape("truth does not match the library".into()));
    }
    let qt = array_to_matrix(&differentiate_dataset(dataset, diff, AxisId::Time, 1)?);
    let resid = &qt - fm.values * &truth.xi;
    let denom = qt.norm();
    if denom == 0.0 {
        return Err(Error::Metric("time derivative is identically zero".into()));
    }
    Ok(resid.norm() / denom)
}
