//! Adaptive Dormand–Prince 5(4) integration with dense output.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Dense output weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

#[derive(Debug, Clone, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Integration stops, keeping the output so far, once `‖y‖` exceeds this.
    pub max_norm: f64,
    pub max_steps: usize,
    pub first_step: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_norm: 1e8,
            max_steps: 1_000_000,
            first_step: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    /// Output times reached; a prefix of the requested times.
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Set when integration stopped before the last requested time.
    pub truncated: Option<String>,
    pub n_steps: usize,
    pub n_rejected: usize,
}

fn error_norm(err: &[f64], y: &[f64], y_new: &[f64], opts: &OdeOptions) -> f64 {
    let s: f64 = err
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / err.len() as f64).sqrt()
}

fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Integrates `dy/dt = f(t, y)` from `t_eval[0]` and reports the state at
/// every `t_eval` entry by dense interpolation.
pub fn solve_ivp<F>(mut f: F, y0: &[f64], t_eval: &[f64], opts: &OdeOptions) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if t_eval.is_empty() {
        return Err(Error::Integration("no output times".into()));
    }
    if t_eval.windows(2).any(|w| !(w[1] > w[0])) || t_eval.iter().any(|t| !t.is_finite()) {
        return Err(Error::Integration("output times must be finite and strictly increasing".into()));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state".into()));
    }
    if !(opts.rtol > 0.0 && opts.atol >= 0.0) {
        return Err(Error::param("rtol", "tolerances must be positive"));
    }
    let n = y0.len();
    let t_end = t_eval[t_eval.len() - 1];
    let mut out = OdeSolution {
        times: vec![t_eval[0]],
        states: vec![y0.to_vec()],
        truncated: None,
        n_steps: 0,
        n_rejected: 0,
    };
    if t_eval.len() == 1 {
        return Ok(out);
    }
    let mut t = t_eval[0];
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    f(t, &y, &mut k[0]);
    let mut h = opts
        .first_step
        .unwrap_or_else(|| initial_step(&mut f, t, &y, &k[0], opts));
    h = h.min(t_end - t);
    let mut next = 1;
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut fac_prev_reject = false;
    while next < t_eval.len() {
        if out.n_steps + out.n_rejected >= opts.max_steps {
            out.truncated = Some(format!("step limit {} reached at t = {t}", opts.max_steps));
            break;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            out.truncated = Some(format!("step size underflow at t = {t}"));
            break;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += h * A[s][j] * kj[i];
                }
                y_stage[i] = acc;
            }
            // The last stage sits at the fifth-order solution and is
            // reused as the first stage of the next step.
            f(t + C[s] * h, &y_stage, &mut k[s]);
        }
        y_new.copy_from_slice(&y_stage);
        for i in 0..n {
            err[i] = h * E.iter().zip(&k).map(|(e, kk)| e * kk[i]).sum::<f64>();
        }
        let en = error_norm(&err, &y, &y_new, opts);
        if !en.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            h *= 0.2;
            out.n_rejected += 1;
            fac_prev_reject = true;
            continue;
        }
        if en > 1.0 {
            h *= (0.9 * en.powf(-0.2)).max(0.2);
            out.n_rejected += 1;
            fac_prev_reject = true;
            continue;
        }
        out.n_steps += 1;
        let t_new = t + h;
        // Dense output coefficients over [t, t_new].
        let cont: Vec<[f64; 5]> = (0..n)
            .map(|i| {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                [
                    y[i],
                    ydiff,
                    bspl,
                    ydiff - h * k[6][i] - bspl,
                    h * D.iter().zip(&k).map(|(d, kk)| d * kk[i]).sum::<f64>(),
                ]
            })
            .collect();
        while next < t_eval.len() && t_eval[next] <= t_new + 1e-12 * t_new.abs().max(1.0) {
            let s = ((t_eval[next] - t) / h).clamp(0.0, 1.0);
            let s1 = 1.0 - s;
            out.times.push(t_eval[next]);
            out.states.push(
                cont.iter()
                    .map(|c| c[0] + s * (c[1] + s1 * (c[2] + s * (c[3] + s1 * c[4]))))
                    .collect(),
            );
            next += 1;
        }
        t = t_new;
        y.copy_from_slice(&y_new);
        k.swap(0, 6);
        if norm(&y) > opts.max_norm {
            out.truncated = Some(format!(
                "state norm exceeded {:e} at t = {t}; trajectory truncated",
                opts.max_norm
            ));
            break;
        }
        let mut fac = 0.9 * en.max(1e-10).powf(-0.2);
        fac = fac.clamp(0.2, 10.0);
        if fac_prev_reject {
            fac = fac.min(1.0);
            fac_prev_reject = false;
        }
        h = (h * fac).min(t_end - t);
        if next < t_eval.len() && h <= 0.0 {
            h = t_eval[next] - t;
        }
    }
    Ok(out)
}

fn initial_step<F>(f: &mut F, t: f64, y: &[f64], f0: &[f64], opts: &OdeOptions) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let scale: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let rms = |v: &[f64]| {
        (v.iter().zip(&scale).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / v.len().max(1) as f64).sqrt()
    };
    let (d0, d1) = (rms(y), rms(f0));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    f(t + h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exponential_growth() {
        let s = solve_ivp(|_, y, dy| dy[0] = y[0], &[1.0], &[0.0, 0.5, 1.0], &OdeOptions::default()).unwrap();
        assert!((s.states[2][0] - 1f64.exp()).abs() < 1e-6);
        assert!((s.states[1][0] - 0.5f64.exp()).abs() < 1e-6);
        assert!(s.truncated.is_none());
    }

    #[test]
    fn dense_output_is_accurate_between_steps() {
        // Harmonic oscillator sampled much finer than the step size.
        let t = linspace(0.0, 10.0, 2001);
        let opts = OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            ..Default::default()
        };
        let s = solve_ivp(|_, y, dy| { dy[0] = y[1]; dy[1] = -y[0]; }, &[1.0, 0.0], &t, &opts).unwrap();
        assert!(s.n_steps < 2000);
        for (ti, yi) in s.times.iter().zip(&s.states) {
            assert!((yi[0] - ti.cos()).abs() < 1e-8, "t = {ti}");
            assert!((yi[1] + ti.sin()).abs() < 1e-8, "t = {ti}");
        }
    }

    #[test]
    fn blow_up_truncates() {
        // y' = y², y(0) = 1 blows up at t = 1.
        let t = linspace(0.0, 2.0, 21);
        let s = solve_ivp(|_, y, dy| dy[0] = y[0] * y[0], &[1.0], &t, &OdeOptions::default()).unwrap();
        assert!(s.truncated.is_some());
        assert!(s.times.len() < 21 && *s.times.last().unwrap() < 1.0);
    }

    #[test]
    fn tolerance_controls_error() {
        let run = |rtol: f64| {
            let opts = OdeOptions {
                rtol,
                atol: rtol * 1e-2,
                ..Default::default()
            };
            let s = solve_ivp(|t, y, dy| dy[0] = -2.0 * t * y[0], &[1.0], &[0.0, 2.0], &opts).unwrap();
            (s.states[1][0] - (-4f64).exp()).abs()
        };
        assert!(run(1e-10) < run(1e-5));
        assert!(run(1e-10) < 1e-9);
    }

    #[test]
    fn rejects_bad_times() {
        let f = |_: f64, _: &[f64], dy: &mut [f64]| dy[0] = 0.0;
        assert!(solve_ivp(f, &[0.0], &[0.0, 0.0], &OdeOptions::default()).is_err());
        assert!(solve_ivp(f, &[0.0], &[], &OdeOptions::default()).is_err());
    }
}
