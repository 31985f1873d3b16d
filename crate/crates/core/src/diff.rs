//! Numerical differentiation along one axis of sampled data.
//!
//! Three engines are available: finite differences of arbitrary even
//! accuracy order on arbitrary nodes, Savitzky-Golay local polynomial
//! derivatives, and Fourier spectral derivatives for periodic uniform data.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::{ArrayD, Axis as NdAxis, Zip};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::data::{Axis, AxisId, Dataset};
use crate::error::{Error, Result};

/// Differentiation engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffMethod {
    /// Centered stencils of accuracy `order` in the interior and one-sided
    /// stencils of the same order at the boundaries.
    FiniteDifference { order: usize },
    /// Local least-squares polynomial of degree `poly_order` over `window`
    /// points; boundary points use the first or last full window.
    SavitzkyGolay { window: usize, poly_order: usize },
    /// Fourier derivative with low-pass filter `exp(-s (k/k_max)^8)`.
    /// Assumes the samples are one period of a periodic signal.
    Spectral {
        #[serde(default)]
        filter_strength: f64,
    },
}

impl Default for DiffMethod {
    fn default() -> Self {
        DiffMethod::FiniteDifference { order: 2 }
    }
}

impl DiffMethod {
    /// Check parameter ranges that do not depend on the data.
    pub fn validate(&self, d: usize) -> Result<()> {
        if d == 0 {
            return Err(Error::param("d", "derivative order must be >= 1"));
        }
        match *self {
            DiffMethod::FiniteDifference { order } => {
                if order < 2 || order % 2 != 0 {
                    return Err(Error::param("order", format!("{order} is not an even integer >= 2")));
                }
            }
            DiffMethod::SavitzkyGolay { window, poly_order } => {
                if window < 5 || window % 2 == 0 {
                    return Err(Error::param("window", format!("{window} is not an odd integer >= 5")));
                }
                if poly_order < 2 || poly_order >= window {
                    return Err(Error::param(
                        "poly_order",
                        format!("{poly_order} must satisfy 2 <= poly_order < window"),
                    ));
                }
                if poly_order < d {
                    return Err(Error::param(
                        "poly_order",
                        format!("{poly_order} is below the derivative order {d}"),
                    ));
                }
            }
            DiffMethod::Spectral { filter_strength } => {
                if !(filter_strength >= 0.0) || !filter_strength.is_finite() {
                    return Err(Error::param("filter_strength", "must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Smallest axis length the method supports for derivative order `d`.
    pub fn min_len(&self, d: usize) -> usize {
        match *self {
            DiffMethod::FiniteDifference { order } => order + d,
            DiffMethod::SavitzkyGolay { window, .. } => window,
            DiffMethod::Spectral { .. } => 2,
        }
    }
}

impl fmt::Display for DiffMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiffMethod::FiniteDifference { order } => write!(f, "fd:{order}"),
            DiffMethod::SavitzkyGolay { window, poly_order } => write!(f, "sg:{window},{poly_order}"),
            DiffMethod::Spectral { filter_strength } => write!(f, "spectral:{filter_strength}"),
        }
    }
}

/// Parses `fd:<order> | sg:<window>,<poly> | spectral[:<filter>]`.
impl FromStr for DiffMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param("diff", format!("cannot parse `{s}`"));
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let m = match (head, rest) {
            ("fd", Some(r)) => DiffMethod::FiniteDifference {
                order: r.trim().parse().map_err(|_| bad())?,
            },
            ("sg", Some(r)) => {
                let (w, p) = r.split_once(',').ok_or_else(bad)?;
                DiffMethod::SavitzkyGolay {
                    window: w.trim().parse().map_err(|_| bad())?,
                    poly_order: p.trim().parse().map_err(|_| bad())?,
                }
            }
            ("spectral", None) => DiffMethod::Spectral { filter_strength: 0.0 },
            ("spectral", Some(r)) => DiffMethod::Spectral {
                filter_strength: r.trim().parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        m.validate(1)?;
        Ok(m)
    }
}

/// Finite-difference weights for derivatives `0..=max_deriv` at `z` on
/// arbitrary distinct `nodes` (interpolating-polynomial recursion).
/// Returns `w[k][j]`, the weight of node `j` for derivative `k`.
pub fn fd_weights(z: f64, nodes: &[f64], max_deriv: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_deriv + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    for i in 1..n {
        let mn = i.min(max_deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Savitzky-Golay weights: least-squares polynomial of degree `poly` through
/// `nodes`, `d`-th derivative evaluated at `z`.
fn sg_weights(z: f64, nodes: &[f64], poly: usize, d: usize) -> Vec<f64> {
    let w = nodes.len();
    let scale = (nodes[w - 1] - nodes[0]) / (w - 1) as f64;
    let v = DMatrix::from_fn(w, poly + 1, |i, j| ((nodes[i] - z) / scale).powi(j as i32));
    // Rows of the pseudo-inverse map samples to polynomial coefficients.
    let pinv = v
        .pseudo_inverse(1e-13)
        .expect("pseudo-inverse of a Vandermonde block");
    let fact: f64 = (1..=d).map(|k| k as f64).product();
    let factor = fact / scale.powi(d as i32);
    pinv.row(d).iter().map(|c| c * factor).collect()
}

/// Per-position linear stencils along one axis.
struct Stencils {
    rows: Vec<(usize, Arc<Vec<f64>>)>,
}

impl Stencils {
    fn apply(&self, input: &[f64], out: &mut [f64]) {
        for (o, (start, w)) in out.iter_mut().zip(&self.rows) {
            *o = w.iter().zip(&input[*start..]).map(|(a, b)| a * b).sum();
        }
    }

    fn fd(axis: &[f64], order: usize, d: usize) -> Self {
        let len = axis.len();
        let centered = 2 * ((d + 1) / 2) - 1 + order;
        let half = centered / 2;
        let edge = d + order;
        let uniform = crate::data::Axis::new("_", axis.to_vec())
            .map(|a| a.is_uniform())
            .unwrap_or(false);
        let mut interior: Option<Arc<Vec<f64>>> = None;
        let rows = (0..len)
            .map(|i| {
                if i >= half && i + half < len {
                    let nodes = &axis[i - half..=i + half];
                    let w = if uniform {
                        interior
                            .get_or_insert_with(|| Arc::new(fd_weights(axis[i], nodes, d).swap_remove(d)))
                            .clone()
                    } else {
                        Arc::new(fd_weights(axis[i], nodes, d).swap_remove(d))
                    };
                    (i - half, w)
                } else {
                    let start = if i < half { 0 } else { len - edge };
                    let nodes = &axis[start..start + edge];
                    (start, Arc::new(fd_weights(axis[i], nodes, d).swap_remove(d)))
                }
            })
            .collect();
        Self { rows }
    }

    fn sg(axis: &[f64], window: usize, poly: usize, d: usize) -> Self {
        let len = axis.len();
        let half = window / 2;
        let uniform = crate::data::Axis::new("_", axis.to_vec())
            .map(|a| a.is_uniform())
            .unwrap_or(false);
        let mut interior: Option<Arc<Vec<f64>>> = None;
        let rows = (0..len)
            .map(|i| {
                let start = if i < half {
                    0
                } else if i + half >= len {
                    len - window
                } else {
                    i - half
                };
                let nodes = &axis[start..start + window];
                let centered = start + half == i;
                let w = if centered && uniform {
                    interior
                        .get_or_insert_with(|| Arc::new(sg_weights(axis[i], nodes, poly, d)))
                        .clone()
                } else {
                    Arc::new(sg_weights(axis[i], nodes, poly, d))
                };
                (start, w)
            })
            .collect();
        Self { rows }
    }
}

/// Fourier multiplier for the spectral derivative of order `d`.
struct SpectralPlan {
    multiplier: Vec<Complex64>,
    forward: Arc<dyn rustfft::Fft<f64>>,
    inverse: Arc<dyn rustfft::Fft<f64>>,
}

impl SpectralPlan {
    fn new(axis: &[f64], d: usize, filter_strength: f64) -> Self {
        let n = axis.len();
        let h = (axis[n - 1] - axis[0]) / (n - 1) as f64;
        let period = h * n as f64;
        let k_max = std::f64::consts::PI / h;
        let multiplier = (0..n)
            .map(|j| {
                let nyquist = n % 2 == 0 && j == n / 2;
                if nyquist && d % 2 == 1 {
                    return Complex64::new(0.0, 0.0);
                }
                let signed = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                let k = 2.0 * std::f64::consts::PI * signed / period;
                let filt = if filter_strength > 0.0 {
                    (-filter_strength * (k.abs() / k_max).powi(8)).exp()
                } else {
                    1.0
                };
                Complex64::new(0.0, k).powu(d as u32) * (filt / n as f64)
            })
            .collect();
        let mut planner = FftPlanner::new();
        Self {
            multiplier,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    fn apply(&self, input: &[f64], out: &mut [f64]) {
        let mut buf: Vec<Complex64> = input.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (b, m) in buf.iter_mut().zip(&self.multiplier) {
            *b *= m;
        }
        self.inverse.process(&mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = b.re;
        }
    }
}

enum Plan {
    Stencils(Stencils),
    Spectral(SpectralPlan),
}

impl Plan {
    fn new(axis: &[f64], uniform: bool, method: DiffMethod, d: usize) -> Result<Self> {
        method.validate(d)?;
        let need = method.min_len(d);
        if axis.len() < need {
            return Err(Error::Sizing(format!(
                "{method} with derivative order {d} needs at least {need} points, axis has {}",
                axis.len()
            )));
        }
        Ok(match method {
            DiffMethod::FiniteDifference { order } => Plan::Stencils(Stencils::fd(axis, order, d)),
            DiffMethod::SavitzkyGolay { window, poly_order } => {
                Plan::Stencils(Stencils::sg(axis, window, poly_order, d))
            }
            DiffMethod::Spectral { filter_strength } => {
                if !uniform {
                    return Err(Error::Grid("spectral differentiation needs a uniform axis".into()));
                }
                Plan::Spectral(SpectralPlan::new(axis, d, filter_strength))
            }
        })
    }

    fn apply(&self, input: &[f64], out: &mut [f64]) {
        match self {
            Plan::Stencils(s) => s.apply(input, out),
            Plan::Spectral(s) => s.apply(input, out),
        }
    }
}

/// `d`-th derivative of `values` sampled at `axis`.
pub fn differentiate(values: &[f64], axis: &[f64], method: DiffMethod, d: usize) -> Result<Vec<f64>> {
    if values.len() != axis.len() {
        return Err(Error::Shape(format!(
            "{} values on an axis of {} points",
            values.len(),
            axis.len()
        )));
    }
    let ax = Axis::new("_", axis.to_vec())?;
    let plan = Plan::new(axis, ax.is_uniform(), method, d)?;
    let mut out = vec![0.0; values.len()];
    plan.apply(values, &mut out);
    Ok(out)
}

/// Differentiate every lane of `arr` along array dimension `dim`.
pub fn differentiate_array(
    arr: &ArrayD<f64>,
    dim: usize,
    axis: &Axis,
    method: DiffMethod,
    d: usize,
) -> Result<ArrayD<f64>> {
    if arr.shape()[dim] != axis.len() {
        return Err(Error::Shape(format!(
            "array dimension {dim} has length {}, axis `{}` has {}",
            arr.shape()[dim],
            axis.name(),
            axis.len()
        )));
    }
    let plan = Plan::new(axis.values(), axis.is_uniform(), method, d)?;
    let mut out = ArrayD::zeros(arr.raw_dim());
    Zip::from(out.lanes_mut(NdAxis(dim)))
        .and(arr.lanes(NdAxis(dim)))
        .par_for_each(|mut o, i| {
            let input: Vec<f64> = i.iter().copied().collect();
            let mut buf = vec![0.0; input.len()];
            plan.apply(&input, &mut buf);
            for (dst, src) in o.iter_mut().zip(buf) {
                *dst = src;
            }
        });
    Ok(out)
}

/// Derivative of the dataset's states along `axis`. Precomputed time
/// derivatives are returned verbatim when `axis` is time and `d == 1`.
pub fn differentiate_dataset(
    dataset: &Dataset,
    method: DiffMethod,
    axis: AxisId,
    d: usize,
) -> Result<ArrayD<f64>> {
    if axis == AxisId::Time && d == 1 {
        if let Some(dv) = dataset.derivatives() {
            return Ok(dv.clone());
        }
    }
    let grid = dataset.grid();
    differentiate_array(dataset.states(), grid.dim_of(axis), grid.axis(axis), method, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Grid;
    use ndarray::{Array, IxDyn};
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    const FD2: DiffMethod = DiffMethod::FiniteDifference { order: 2 };

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    fn periodic(n: usize, period: f64) -> Vec<f64> {
        (0..n).map(|i| period * i as f64 / n as f64).collect()
    }

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn fd2_exact_on_quadratic() {
        let t = linspace(0.0, 4.0, 5);
        let v: Vec<f64> = t.iter().map(|x| x * x).collect();
        let d = differentiate(&v, &t, FD2, 1).unwrap();
        assert!(max_err(&d, &[0.0, 2.0, 4.0, 6.0, 8.0]) < 1e-12, "{d:?}");
    }

    #[test]
    fn fd_weights_classic_values() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w[1], vec![-0.5, 0.0, 0.5]);
        assert_eq!(w[2], vec![1.0, -2.0, 1.0]);
        let w4 = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 4);
        for (a, b) in w4[4].iter().zip([1.0, -4.0, 6.0, -4.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fd_polynomial_exactness_including_boundaries() {
        // Nonuniform nodes as well as uniform ones.
        for nodes in [linspace(-1.0, 2.0, 21), (0..21).map(|i| (i as f64 * 0.13).powf(1.3)).collect()] {
            for p in [2usize, 4, 6, 8] {
                let v: Vec<f64> = nodes.iter().map(|x| (0..=p).map(|k| (k as f64 + 1.0) * x.powi(k as i32)).sum()).collect();
                let exact: Vec<f64> = nodes
                    .iter()
                    .map(|x| (1..=p).map(|k| k as f64 * (k as f64 + 1.0) * x.powi(k as i32 - 1)).sum())
                    .collect();
                let d = differentiate(&v, &nodes, DiffMethod::FiniteDifference { order: p }, 1).unwrap();
                for (a, b) in d.iter().zip(&exact) {
                    assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "p={p}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn fd_convergence_rate() {
        for p in [2usize, 4, 6] {
            let err = |n: usize| {
                let t = linspace(0.0, 2.0, n);
                let v: Vec<f64> = t.iter().map(|x| x.sin()).collect();
                let d = differentiate(&v, &t, DiffMethod::FiniteDifference { order: p }, 1).unwrap();
                let exact: Vec<f64> = t.iter().map(|x| x.cos()).collect();
                max_err(&d, &exact)
            };
            let (coarse, fine) = (err(41), err(81));
            let ratio = coarse / fine;
            assert!(ratio >= 2f64.powf(p as f64 - 0.5), "p={p}: ratio {ratio}");
        }
    }

    #[test]
    fn fd_higher_derivatives() {
        let x = linspace(0.0, 1.0, 201);
        let v: Vec<f64> = x.iter().map(|t| (2.0 * t).sin()).collect();
        let d4 = differentiate(&v, &x, DiffMethod::FiniteDifference { order: 4 }, 4).unwrap();
        let exact: Vec<f64> = x.iter().map(|t| 16.0 * (2.0 * t).sin()).collect();
        assert!(max_err(&d4, &exact) < 1e-2);
    }

    #[test]
    fn spectral_sin_to_cos() {
        let x = periodic(64, 2.0 * PI);
        let v: Vec<f64> = x.iter().map(|t| t.sin()).collect();
        let d = differentiate(&v, &x, DiffMethod::Spectral { filter_strength: 0.0 }, 1).unwrap();
        let exact: Vec<f64> = x.iter().map(|t| t.cos()).collect();
        assert!(max_err(&d, &exact) <= 1e-10);
    }

    #[test]
    fn spectral_filter_damps_high_modes() {
        let x = periodic(64, 2.0 * PI);
        let v: Vec<f64> = x.iter().map(|t| (30.0 * t).sin()).collect();
        let raw = differentiate(&v, &x, DiffMethod::Spectral { filter_strength: 0.0 }, 1).unwrap();
        let filt = differentiate(&v, &x, DiffMethod::Spectral { filter_strength: 10.0 }, 1).unwrap();
        let norm = |a: &[f64]| a.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm(&filt) < 0.01 * norm(&raw));
    }

    #[test]
    fn spectral_antiderivative_round_trip() {
        // Build a zero-mean periodic signal and its spectral antiderivative.
        let n = 128;
        let period = 7.0;
        let x = periodic(n, period);
        let k = 2.0 * PI / period;
        let sig: Vec<f64> = x
            .iter()
            .map(|t| (k * t).cos() - 0.3 * (3.0 * k * t).sin() + 0.1 * (5.0 * k * t).cos())
            .collect();
        let anti: Vec<f64> = x
            .iter()
            .map(|t| (k * t).sin() / k + 0.3 * (3.0 * k * t).cos() / (3.0 * k) + 0.1 * (5.0 * k * t).sin() / (5.0 * k))
            .collect();
        let back = differentiate(&anti, &x, DiffMethod::Spectral { filter_strength: 0.0 }, 1).unwrap();
        assert!(max_err(&back, &sig) < 1e-9);
    }

    #[test]
    fn spectral_rejects_nonuniform() {
        let x = vec![0.0, 0.1, 0.3, 0.4];
        assert!(matches!(
            differentiate(&[0.0; 4], &x, DiffMethod::Spectral { filter_strength: 0.0 }, 1),
            Err(Error::Grid(_))
        ));
    }

    #[test]
    fn savitzky_golay_exact_on_low_degree() {
        let x = linspace(0.0, 3.0, 40);
        let v: Vec<f64> = x.iter().map(|t| 1.0 - t + 0.5 * t * t - 0.2 * t.powi(3)).collect();
        let exact: Vec<f64> = x.iter().map(|t| -1.0 + t - 0.6 * t * t).collect();
        let d = differentiate(&v, &x, DiffMethod::SavitzkyGolay { window: 9, poly_order: 3 }, 1).unwrap();
        assert!(max_err(&d, &exact) < 1e-9);
    }

    #[test]
    fn savitzky_golay_suppresses_noise() {
        let t = linspace(0.0, 10.0, 1000);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let v: Vec<f64> = t.iter().map(|x| x.sin() + noise.sample(&mut rng)).collect();
        let exact: Vec<f64> = t.iter().map(|x| x.cos()).collect();
        let sg = differentiate(&v, &t, DiffMethod::SavitzkyGolay { window: 21, poly_order: 3 }, 1).unwrap();
        let fd = differentiate(&v, &t, FD2, 1).unwrap();
        let rms = |d: &[f64]| {
            let inner = 10..d.len() - 10;
            let n = inner.len() as f64;
            (inner.map(|i| (d[i] - exact[i]).powi(2)).sum::<f64>() / n).sqrt()
        };
        let (e_sg, e_fd) = (rms(&sg), rms(&fd));
        assert!(e_fd >= 3.0 * e_sg, "sg {e_sg} fd {e_fd}");
    }

    #[test]
    fn parameter_validation() {
        let x = linspace(0.0, 1.0, 10);
        let v = vec![0.0; 10];
        assert!(differentiate(&v, &x, DiffMethod::FiniteDifference { order: 3 }, 1).is_err());
        assert!(differentiate(&v, &x, DiffMethod::SavitzkyGolay { window: 4, poly_order: 2 }, 1).is_err());
        assert!(differentiate(&v, &x, DiffMethod::SavitzkyGolay { window: 7, poly_order: 2 }, 3).is_err());
        assert!(matches!(
            differentiate(&v, &x, DiffMethod::SavitzkyGolay { window: 11, poly_order: 3 }, 1),
            Err(Error::Sizing(_))
        ));
        assert!(matches!(
            differentiate(&v[..3], &x[..3], DiffMethod::FiniteDifference { order: 2 }, 2),
            Err(Error::Sizing(_))
        ));
        assert!(differentiate(&v[..3], &x, FD2, 1).is_err());
    }

    #[test]
    fn parse_cli_syntax() {
        assert_eq!("fd:4".parse::<DiffMethod>().unwrap(), DiffMethod::FiniteDifference { order: 4 });
        assert_eq!(
            "sg:11,3".parse::<DiffMethod>().unwrap(),
            DiffMethod::SavitzkyGolay { window: 11, poly_order: 3 }
        );
        assert_eq!(
            "spectral".parse::<DiffMethod>().unwrap(),
            DiffMethod::Spectral { filter_strength: 0.0 }
        );
        assert_eq!(
            "spectral:2.5".parse::<DiffMethod>().unwrap(),
            DiffMethod::Spectral { filter_strength: 2.5 }
        );
        assert!("fd".parse::<DiffMethod>().is_err());
        assert!("sg:10,3".parse::<DiffMethod>().is_err());
        for m in ["fd:6", "sg:9,4", "spectral:0.5"] {
            let parsed: DiffMethod = m.parse().unwrap();
            assert_eq!(parsed.to_string().parse::<DiffMethod>().unwrap(), parsed);
        }
    }

    #[test]
    fn dataset_bilinear_time_derivative() {
        let xs = linspace(0.0, 1.0, 5);
        let ts = linspace(0.0, 2.0, 5);
        let grid = Grid::new(
            vec![Axis::new("x", xs.clone()).unwrap()],
            Axis::new("t", ts.clone()).unwrap(),
        )
        .unwrap();
        let s = Array::from_shape_fn(IxDyn(&[5, 5, 1]), |ix| xs[ix[0]] * ts[ix[1]]);
        let ds = Dataset::new(grid, s).unwrap();
        let dt = differentiate_dataset(&ds, FD2, AxisId::Time, 1).unwrap();
        for ix in ndarray::indices(dt.raw_dim()) {
            assert!((dt[&ix] - xs[ix[0]]).abs() < 1e-12);
        }
    }

    #[test]
    fn dataset_precomputed_bypass() {
        let ds = Dataset::from_trajectory(linspace(0.0, 1.0, 6), &DMatrix::from_fn(6, 1, |i, _| i as f64))
            .unwrap();
        let fake = ArrayD::from_elem(IxDyn(&[6, 1]), 42.0);
        let ds = ds.with_derivatives(fake.clone()).unwrap();
        assert_eq!(differentiate_dataset(&ds, FD2, AxisId::Time, 1).unwrap(), fake);
    }

    #[test]
    fn dataset_spectral_second_derivative() {
        let xs = periodic(64, 2.0 * PI);
        let grid = Grid::new(
            vec![Axis::new("x", xs.clone()).unwrap().with_periodic(true)],
            Axis::new("t", linspace(0.0, 1.0, 3)).unwrap(),
        )
        .unwrap();
        let s = Array::from_shape_fn(IxDyn(&[64, 3, 1]), |ix| xs[ix[0]].sin());
        let ds = Dataset::new(grid, s).unwrap();
        let dxx = differentiate_dataset(&ds, DiffMethod::Spectral { filter_strength: 0.0 }, AxisId::Spatial(0), 2)
            .unwrap();
        for ix in ndarray::indices(dxx.raw_dim()) {
            assert!((dxx[&ix] + xs[ix[0]].sin()).abs() <= 1e-8);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn methods() -> Vec<DiffMethod> {
            vec![
                DiffMethod::FiniteDifference { order: 2 },
                DiffMethod::FiniteDifference { order: 6 },
                DiffMethod::SavitzkyGolay { window: 7, poly_order: 3 },
                DiffMethod::Spectral { filter_strength: 1.0 },
            ]
        }

        proptest! {
            #[test]
            fn linearity(
                f in proptest::collection::vec(-10.0f64..10.0, 32),
                g in proptest::collection::vec(-10.0f64..10.0, 32),
                a in -5.0f64..5.0,
                b in -5.0f64..5.0,
            ) {
                let x = periodic(32, 3.0);
                let combo: Vec<f64> = f.iter().zip(&g).map(|(u, v)| a * u + b * v).collect();
                for m in methods() {
                    let df = differentiate(&f, &x, m, 1).unwrap();
                    let dg = differentiate(&g, &x, m, 1).unwrap();
                    let dc = differentiate(&combo, &x, m, 1).unwrap();
                    let scale = df.iter().chain(&dg).map(|v| v.abs()).fold(1.0, f64::max) * (a.abs() + b.abs() + 1.0);
                    for i in 0..32 {
                        let expect = a * df[i] + b * dg[i];
                        prop_assert!((dc[i] - expect).abs() <= 1e-12 * scale);
                    }
                }
            }
        }
    }
}
