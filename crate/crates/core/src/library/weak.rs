//! Weak-form evaluation: every library column and every time derivative is
//! integrated against a separable bump `φ = ∏ (1 - ζ²)^p` on random
//! rectangular subdomains of the grid. Derivatives on the data are moved
//! onto `φ` by integration by parts wherever the term allows it; the bump
//! and its first `p - 1` derivatives vanish on the subdomain boundary, so no
//! boundary terms appear. Integrals use the trapezoidal rule on the grid
//! points inside each subdomain.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Atom, DerivCache, Term};
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct WeakSpec {
    pub n_subdomains: usize,
    pub poly_order: u32,
    pub subdomain_size: Vec<usize>,
    pub seed: u64,
}

/// Coefficients (ascending powers of ζ) of `(1 - ζ²)^p`.
fn bump_coefficients(p: u32) -> Vec<f64> {
    let mut c = vec![0.0; 2 * p as usize + 1];
    let mut binom = 1.0;
    for i in 0..=p as usize {
        c[2 * i] = if i % 2 == 0 { binom } else { -binom };
        binom = binom * (p as usize - i) as f64 / (i + 1) as f64;
    }
    c
}

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, v)| k as f64 * v)
        .collect()
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

/// Trapezoidal weights on (possibly nonuniform) nodes.
fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Quadrature weight times `d^k φ/dx^k` at the window nodes, for k = 0..=max_order.
pub(crate) fn test_function_weights(x: &[f64], p: u32, max_order: usize) -> Vec<Vec<f64>> {
    let (a, b) = (x[0], x[x.len() - 1]);
    let (center, half) = (0.5 * (a + b), 0.5 * (b - a));
    let quad = trapezoid_weights(x);
    let mut poly = bump_coefficients(p);
    let mut out = Vec::with_capacity(max_order + 1);
    for k in 0..=max_order {
        let scale = half.powi(-(k as i32));
        out.push(
            x.iter()
                .zip(&quad)
                .map(|(&xi, &w)| {
                    // Clamp guards against |ζ| creeping past 1 by rounding.
                    let z = ((xi - center) / half).clamp(-1.0, 1.0);
                    w * scale * horner(&poly, z)
                })
                .collect(),
        );
        poly = poly_derivative(&poly);
    }
    out
}

/// How one column is integrated: `scale * ∫ (∂^orders φ) g`.
struct Integrand {
    values: Vec<f64>,
    orders: Vec<usize>,
    scale: f64,
}

pub(super) fn evaluate(
    w: &WeakSpec,
    terms: &[Term],
    dataset: &Dataset,
    cols: &[&[f64]],
    cache: &DerivCache<'_>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let grid = dataset.grid();
    let shape = grid.shape();
    let ndim = shape.len();
    let time_dim = ndim - 1;
    if w.subdomain_size.len() != ndim {
        return Err(Error::param(
            "subdomain_size",
            format!("needs {ndim} entries (spatial axes then time), got {}", w.subdomain_size.len()),
        ));
    }
    for (d, (&size, &len)) in w.subdomain_size.iter().zip(&shape).enumerate() {
        if size < 3 {
            return Err(Error::Sizing(format!(
                "subdomain along axis {d} has {size} points, need at least 3"
            )));
        }
        if size > len {
            return Err(Error::Sizing(format!(
                "subdomain along axis {d} has {size} points but the grid has {len}"
            )));
        }
    }
    let m = cols.first().map_or(0, |c| c.len());
    let dim_of_axis = |name: &str| -> Result<usize> {
        grid.find(name)
            .map(|id| grid.dim_of(id))
            .ok_or_else(|| Error::Library(format!("dataset has no axis named `{name}`")))
    };

    let mut integrands = Vec::with_capacity(terms.len());
    for t in terms {
        let mut orders = vec![0; ndim];
        let integrand = match (t.atoms.as_slice(), t.derivs.as_slice()) {
            (_, []) => Integrand {
                values: (0..m).map(|i| t.factor(cols, i)).collect(),
                orders,
                scale: 1.0,
            },
            ([], [d]) => {
                orders[dim_of_axis(&d.axis)?] = d.order;
                Integrand {
                    values: cols[d.state].to_vec(),
                    orders,
                    scale: if d.order % 2 == 0 { 1.0 } else { -1.0 },
                }
            }
            // q^a q_x = (q^(a+1))_x / (a+1); states are the leading inputs.
            ([Atom::Pow { input, power }], [d]) if d.order == 1 && *input == d.state => {
                orders[dim_of_axis(&d.axis)?] = 1;
                let a = *power as i32;
                Integrand {
                    values: cols[d.state].iter().map(|q| q.powi(a + 1)).collect(),
                    orders,
                    scale: -1.0 / (a + 1) as f64,
                }
            }
            _ => {
                let mats = t
                    .derivs
                    .iter()
                    .map(|d| cache.get(d).map(|mat| (mat, d.state)))
                    .collect::<Result<Vec<_>>>()?;
                Integrand {
                    values: (0..m)
                        .map(|i| {
                            let mut v = t.factor(cols, i);
                            for (mat, s) in &mats {
                                v *= mat[(i, *s)];
                            }
                            v
                        })
                        .collect(),
                    orders,
                    scale: 1.0,
                }
            }
        };
        integrands.push(integrand);
    }
    let n_states = dataset.n_states();
    let mut lhs_orders = vec![0; ndim];
    lhs_orders[time_dim] = 1;
    let lhs: Vec<Integrand> = (0..n_states)
        .map(|s| Integrand {
            values: cols[s].to_vec(),
            orders: lhs_orders.clone(),
            scale: -1.0,
        })
        .collect();

    let max_order: Vec<usize> = (0..ndim)
        .map(|d| {
            integrands
                .iter()
                .chain(&lhs)
                .map(|g| g.orders[d])
                .max()
                .unwrap_or(0)
        })
        .collect();

    let axes: Vec<&[f64]> = grid
        .spatial()
        .iter()
        .map(|a| a.values())
        .chain([grid.time().values()])
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(w.seed);
    let k = w.n_subdomains;
    let mut features = DMatrix::zeros(k, terms.len());
    let mut targets = DMatrix::zeros(k, n_states);

    // Row-major strides of the flattened sample index.
    let mut strides = vec![1usize; ndim];
    for d in (0..ndim - 1).rev() {
        strides[d] = strides[d + 1] * shape[d + 1];
    }

    for row in 0..k {
        let starts: Vec<usize> = (0..ndim)
            .map(|d| rng.random_range(0..=shape[d] - w.subdomain_size[d]))
            .collect();
        let per_axis: Vec<Vec<Vec<f64>>> = (0..ndim)
            .map(|d| {
                let x = &axes[d][starts[d]..starts[d] + w.subdomain_size[d]];
                test_function_weights(x, w.poly_order, max_order[d])
            })
            .collect();

        // Sample indices covered by the window, in odometer order.
        let total: usize = w.subdomain_size.iter().product();
        let mut lin = Vec::with_capacity(total);
        let mut idx = vec![0usize; ndim];
        for _ in 0..total {
            lin.push((0..ndim).map(|d| (starts[d] + idx[d]) * strides[d]).sum::<usize>());
            for d in (0..ndim).rev() {
                idx[d] += 1;
                if idx[d] < w.subdomain_size[d] {
                    break;
                }
                idx[d] = 0;
            }
        }

        let mut weight_cache: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
        let mut integrate = |g: &Integrand| -> f64 {
            let weights = weight_cache.entry(g.orders.clone()).or_insert_with(|| {
                let mut out = Vec::with_capacity(total);
                let mut idx = vec![0usize; ndim];
                for _ in 0..total {
                    out.push((0..ndim).map(|d| per_axis[d][g.orders[d]][idx[d]]).product());
                    for d in (0..ndim).rev() {
                        idx[d] += 1;
                        if idx[d] < w.subdomain_size[d] {
                            break;
                        }
                        idx[d] = 0;
                    }
                }
                out
            });
            g.scale
                * lin
                    .iter()
                    .zip(weights.iter())
                    .map(|(&l, &wt)| g.values[l] * wt)
                    .sum::<f64>()
        };
        for (j, g) in integrands.iter().enumerate() {
            features[(row, j)] = integrate(g);
        }
        for (s, g) in lhs.iter().enumerate() {
            targets[(row, s)] = integrate(g);
        }
    }
    if features.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("weak-form integrals".into()));
    }
    Ok((features, targets))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_coefficients_match_expansion() {
        assert_eq!(bump_coefficients(2), vec![1.0, 0.0, -2.0, 0.0, 1.0]);
        let c = bump_coefficients(3);
        for z in [-0.7, 0.0, 0.3, 0.95] {
            let direct: f64 = (1.0 - z * z) * (1.0 - z * z) * (1.0 - z * z);
            assert!((horner(&c, z) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn bump_vanishes_at_ends_with_low_derivatives() {
        let x: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let w = test_function_weights(&x, 4, 4);
        for k in 0..4 {
            assert!(w[k][0].abs() < 1e-12 && w[k][10].abs() < 1e-12, "order {k}");
        }
    }

    #[test]
    fn integration_by_parts_converges_second_order() {
        // ∫ φ q_x directly versus -∫ φ_x q, q = sin(2x) + x^2.
        let q = |x: f64| (2.0 * x).sin() + x * x;
        let qx = |x: f64| 2.0 * (2.0 * x).cos() + 2.0 * x;
        let err = |n: usize| {
            let x: Vec<f64> = (0..n).map(|i| 0.3 + 1.2 * i as f64 / (n - 1) as f64).collect();
            let w = test_function_weights(&x, 2, 1);
            let direct: f64 = x.iter().zip(&w[0]).map(|(&xi, wi)| wi * qx(xi)).sum();
            let parts: f64 = -x.iter().zip(&w[1]).map(|(&xi, wi)| wi * q(xi)).sum::<f64>();
            (direct - parts).abs()
        };
        let (coarse, fine) = (err(17), err(33));
        let ratio = coarse / fine;
        assert!((3.5..4.5).contains(&ratio), "coarse {coarse} fine {fine}");
    }
}
