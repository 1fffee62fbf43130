//! Fixed-step classical Runge–Kutta integration.

use nalgebra::{DMatrix, DVector};

/// One classical fourth-order Runge–Kutta step of `x' = f(t, x)`.
pub fn rk4_step<F>(f: &F, t: f64, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let half = 0.5 * h;
    let k1 = f(t, x);
    let k2 = f(t + half, &(x + &k1 * half));
    let k3 = f(t + half, &(x + &k2 * half));
    let k4 = f(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Integrates the forced linear system `x' = A x + b w(t)` on a uniform grid.
///
/// Returns `steps + 1` states, the first being `x0`. Stops early and returns
/// `Err(t)` at the first non-finite state.
pub fn integrate_linear<W>(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    forcing: W,
    x0: &DVector<f64>,
    t0: f64,
    h: f64,
    steps: usize,
) -> Result<Vec<DVector<f64>>, f64>
where
    W: Fn(f64) -> f64,
{
    let f = |t: f64, x: &DVector<f64>| a * x + b * forcing(t);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.clone());
    let mut x = x0.clone();
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        x = rk4_step(&f, t, &x, h);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(t + h);
        }
        states.push(x.clone());
    }
    Ok(states)
}

/// Forcing at the midpoint of sample interval `k`, by four-point cubic
/// interpolation (three-point quadratic at the ends).
pub fn midpoint(samples: &[f64], k: usize) -> f64 {
    let n = samples.len();
    debug_assert!(k + 1 < n);
    if n < 3 {
        return 0.5 * (samples[k] + samples[k + 1]);
    }
    if k == 0 {
        (3.0 * samples[0] + 6.0 * samples[1] - samples[2]) / 8.0
    } else if k + 2 >= n {
        (-samples[k - 1] + 6.0 * samples[k] + 3.0 * samples[k + 1]) / 8.0
    } else {
        (-samples[k - 1] + 9.0 * samples[k] + 9.0 * samples[k + 1] - samples[k + 2]) / 16.0
    }
}

/// RK4 for `x' = A x + b w(t)` where `w` is only known on the grid.
///
/// Midpoint forcing uses [`midpoint`], keeping the scheme fourth order for
/// smooth forcing. Returns one state per sample.
pub fn integrate_linear_sampled(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    samples: &[f64],
    x0: &DVector<f64>,
    h: f64,
) -> Vec<DVector<f64>> {
    let mut states = Vec::with_capacity(samples.len());
    if samples.is_empty() {
        return states;
    }
    states.push(x0.clone());
    let mut x = x0.clone();
    for k in 0..samples.len() - 1 {
        let (w0, wm, w1) = (samples[k], midpoint(samples, k), samples[k + 1]);
        let k1 = a * &x + b * w0;
        let k2 = a * (&x + &k1 * (0.5 * h)) + b * wm;
        let k3 = a * (&x + &k2 * (0.5 * h)) + b * wm;
        let k4 = a * (&x + &k3 * h) + b * w1;
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        states.push(x.clone());
    }
    states
}
