//! Analytic inverse: hidden-state reconstruction from output history, the
//! exact and windowed inverse inputs, and the exponential error bounds.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lti::{NormalForm, DEFAULT_TOL};
use crate::ode;
use crate::poly;
use crate::signals::DERIVATIVE_CHANNELS;
use crate::trajectory::Trajectory;

/// Fraction by which the decay rate is pulled inside the spectral abscissa.
pub const ALPHA_MARGIN: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HiddenStateMethod {
    FullHistory,
    FiniteWindow,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HiddenStateEstimate {
    pub eta: DVector<f64>,
    pub window_t: f64,
    pub method: HiddenStateMethod,
}

/// `||exp(A4 t)|| <= kappa1 exp(-alpha1 t)` and the resulting
/// `||eta - eta_hat|| <= beta1 exp(-alpha1 T)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayBound {
    pub kappa1: f64,
    pub alpha1: f64,
    pub beta1: f64,
    /// Output bound used for `beta1`.
    pub m: f64,
}

impl DecayBound {
    pub fn eta_bound(&self, window_t: f64) -> f64 {
        self.beta1 * (-self.alpha1 * window_t).exp()
    }
}

/// Constants of `|u_hat - u| <= L1 |dy^(r)| + L2 |d xi| + L3 exp(-alpha1 T)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseErrorBound {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub alpha1: f64,
}

impl InverseErrorBound {
    pub fn new(nf: &NormalForm, bound: &DecayBound) -> Self {
        let l1 = 1.0 / nf.b_lead.abs();
        Self {
            l1,
            l2: l1 * nf.a_xi.norm(),
            l3: l1 * nf.a_eta.norm() * bound.beta1,
            alpha1: bound.alpha1,
        }
    }

    pub fn evaluate(&self, d_yr: f64, d_xi: f64, window_t: f64) -> f64 {
        self.l1 * d_yr.abs() + self.l2 * d_xi.abs() + self.l3 * (-self.alpha1 * window_t).exp()
    }
}

fn require_minimum_phase(nf: &NormalForm) -> Result<()> {
    if nf.hidden_dim() > 0 && !nf.is_minimum_phase(DEFAULT_TOL)? {
        return Err(Error::OperatorUnstable);
    }
    Ok(())
}

fn eta_channels(h: usize) -> Vec<String> {
    (1..=h).map(|i| format!("eta{i}")).collect()
}

/// Hidden states along an output record that starts from rest, by integrating
/// `eta' = A3 y + A4 eta` from `eta = 0`. Channels `eta1..eta{n-r}`.
pub fn hidden_state_full(nf: &NormalForm, y: &Trajectory) -> Result<Trajectory> {
    require_minimum_phase(nf)?;
    let ys = y.channel("y")?;
    let h = nf.hidden_dim();
    let mut samples = DMatrix::zeros(ys.len(), h);
    if h > 0 {
        let states = ode::integrate_linear_sampled(&nf.a4, &nf.a3, &ys, &DVector::zeros(h), y.dt());
        for (k, s) in states.iter().enumerate() {
            samples.set_row(k, &s.transpose());
        }
    }
    Trajectory::new(y.dt(), y.t0(), eta_channels(h), samples)
}

/// Finite-window estimate: `eta' = A3 y + A4 eta` integrated across the
/// window from zero. The window length is `(len - 1) dt`.
pub fn hidden_state_window(nf: &NormalForm, y_window: &[f64], dt: f64) -> Result<HiddenStateEstimate> {
    require_minimum_phase(nf)?;
    let h = nf.hidden_dim();
    if y_window.len() < 2 || h == 0 {
        return Ok(HiddenStateEstimate {
            eta: DVector::zeros(h),
            window_t: 0.0,
            method: HiddenStateMethod::FiniteWindow,
        });
    }
    let states = ode::integrate_linear_sampled(&nf.a4, &nf.a3, y_window, &DVector::zeros(h), dt);
    Ok(HiddenStateEstimate {
        eta: states.last().unwrap().clone(),
        window_t: (y_window.len() - 1) as f64 * dt,
        method: HiddenStateMethod::FiniteWindow,
    })
}

/// The windowed estimator as a fixed linear map of the window samples.
///
/// Column `j` of the kernel is the windowed estimate for a unit sample at
/// position `j`, so applying it reproduces [`hidden_state_window`] up to
/// rounding while costing one matrix-vector product per evaluation.
#[derive(Clone, Debug)]
pub struct WindowKernel {
    kernel: DMatrix<f64>,
    dt: f64,
}

impl WindowKernel {
    pub fn new(nf: &NormalForm, window_samples: usize, dt: f64) -> Result<Self> {
        require_minimum_phase(nf)?;
        let h = nf.hidden_dim();
        let mut kernel = DMatrix::zeros(h, window_samples);
        if window_samples >= 2 && h > 0 {
            let mut impulse = vec![0.0; window_samples];
            for j in 0..window_samples {
                impulse[j] = 1.0;
                let est = hidden_state_window(nf, &impulse, dt)?;
                kernel.set_column(j, &est.eta);
                impulse[j] = 0.0;
            }
        }
        Ok(Self { kernel, dt })
    }

    pub fn window_samples(&self) -> usize {
        self.kernel.ncols()
    }

    pub fn window_t(&self) -> f64 {
        self.window_samples().saturating_sub(1) as f64 * self.dt
    }

    pub fn apply(&self, y_window: &[f64]) -> DVector<f64> {
        debug_assert_eq!(y_window.len(), self.kernel.ncols());
        &self.kernel * DVector::from_column_slice(y_window)
    }
}

/// `u_d = (y_d^(r) - A_xi xi_d - A_eta eta_d) / b_lead`.
pub fn exact_inverse_input(nf: &NormalForm, xi_d: &DVector<f64>, yr_d: f64, eta_d: &DVector<f64>) -> f64 {
    let xi_term = if nf.r > 0 { (&nf.a_xi * xi_d)[0] } else { 0.0 };
    let eta_term = if nf.hidden_dim() > 0 { (&nf.a_eta * eta_d)[0] } else { 0.0 };
    (yr_d - xi_term - eta_term) / nf.b_lead
}

/// Inverse input with the hidden state replaced by its windowed estimate.
pub fn windowed_inverse_input(nf: &NormalForm, y_history: &[f64], xi_d: &DVector<f64>, yr_d: f64, dt: f64) -> Result<f64> {
    let est = hidden_state_window(nf, y_history, dt)?;
    Ok(exact_inverse_input(nf, xi_d, yr_d, &est.eta))
}

/// Exact inverse along a record with channels `y, dy, ...` through order `r`
/// and matching hidden states.
pub fn exact_inverse_series(nf: &NormalForm, derivatives: &Trajectory, eta: &Trajectory) -> Result<Vec<f64>> {
    let r = nf.r;
    if r >= DERIVATIVE_CHANNELS.len() {
        return Err(Error::Domain(format!("relative degree {r} exceeds available derivative channels")));
    }
    let cols: Vec<Vec<f64>> = (0..=r).map(|j| derivatives.channel(DERIVATIVE_CHANNELS[j])).collect::<Result<_>>()?;
    if eta.len() != derivatives.len() {
        return Err(Error::Dimension("hidden-state record length differs from derivative record".into()));
    }
    let h = nf.hidden_dim();
    Ok((0..derivatives.len())
        .map(|k| {
            let xi = DVector::from_iterator(r, (0..r).map(|j| cols[j][k]));
            let e = DVector::from_iterator(h, (0..h).map(|j| eta.samples()[(k, j)]));
            exact_inverse_input(nf, &xi, cols[r][k], &e)
        })
        .collect())
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Exponential envelope of the zero dynamics, fitted on `t_grid`.
pub fn decay_bound(nf: &NormalForm, m: f64, t_grid: &[f64]) -> Result<DecayBound> {
    if !(m >= 0.0) {
        return Err(Error::Domain(format!("output bound must be non-negative, got {m}")));
    }
    if nf.hidden_dim() == 0 {
        return Ok(DecayBound { kappa1: 1.0, alpha1: f64::INFINITY, beta1: 0.0, m });
    }
    let abscissa = poly::spectral_abscissa(&nf.a4)?;
    if !(abscissa < 0.0) {
        return Err(Error::NoExponentialBound);
    }
    let alpha1 = -abscissa * (1.0 - ALPHA_MARGIN);
    let kappa1 = t_grid
        .iter()
        .map(|&t| spectral_norm(&(&nf.a4 * t).exp()) * (alpha1 * t).exp())
        .fold(1.0f64, f64::max);
    let beta1 = m * nf.a3.norm() * kappa1 / alpha1;
    Ok(DecayBound { kappa1, alpha1, beta1, m })
}

/// Uniform grid `0, step, ..., horizon` for [`decay_bound`].
pub fn default_decay_grid(nf: &NormalForm) -> Result<Vec<f64>> {
    let abscissa = poly::spectral_abscissa(&nf.a4)?;
    let spectral_radius = poly::eigenvalues(&nf.a4)?.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if !(abscissa < 0.0) {
        return Err(Error::NoExponentialBound);
    }
    let horizon = 40.0 / -abscissa;
    let step = 0.05 / spectral_radius.max(-abscissa);
    let count = (horizon / step).ceil() as usize;
    Ok((0..=count).map(|i| i as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{build_example_system, normal_form, StateSpace};
    use nalgebra::RowDVector;

    fn example_nf() -> NormalForm {
        normal_form(&build_example_system(), DEFAULT_TOL).unwrap()
    }

    #[test]
    fn zero_output_gives_zero_hidden_state() {
        let nf = example_nf();
        let y = Trajectory::from_fn(0.01, 0.0, 500, "y", |_| 0.0).unwrap();
        let eta = hidden_state_full(&nf, &y).unwrap();
        assert!(eta.samples().iter().all(|v| *v == 0.0));
        let est = hidden_state_window(&nf, &[0.0; 50], 0.01).unwrap();
        assert_eq!(est.eta.norm(), 0.0);
        let empty = hidden_state_window(&nf, &[1.0], 0.01).unwrap();
        assert_eq!(empty.window_t, 0.0);
        assert_eq!(empty.eta.norm(), 0.0);
    }

    #[test]
    fn constant_output_reaches_equilibrium() {
        let nf = example_nf();
        let y = Trajectory::from_fn(0.01, 0.0, 3001, "y", |_| 1.0).unwrap();
        let eta = hidden_state_full(&nf, &y).unwrap();
        let a4_inv = nf.a4.clone().try_inverse().unwrap();
        let eq = -(a4_inv * &nf.a3);
        let last = eta.samples().row(eta.len() - 1).transpose();
        assert!((last - eq).norm() < 1e-10);
    }

    #[test]
    fn exact_inverse_values() {
        let nf = example_nf();
        let zero2 = DVector::zeros(2);
        assert_eq!(exact_inverse_input(&nf, &zero2, 0.0, &zero2), 0.0);
        assert!((exact_inverse_input(&nf, &zero2, 11.0, &zero2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_inverse_is_linear() {
        let nf = example_nf();
        let xi1 = DVector::from_column_slice(&[0.3, -1.2]);
        let xi2 = DVector::from_column_slice(&[-0.7, 0.4]);
        let e1 = DVector::from_column_slice(&[1.5, 0.2]);
        let e2 = DVector::from_column_slice(&[-0.1, 2.0]);
        let lhs = exact_inverse_input(&nf, &(&xi1 * 2.0 + &xi2), 2.0 * 3.0 + 5.0, &(&e1 * 2.0 + &e2));
        let rhs = 2.0 * exact_inverse_input(&nf, &xi1, 3.0, &e1) + exact_inverse_input(&nf, &xi2, 5.0, &e2);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn empty_window_matches_exact_when_eta_is_zero() {
        let nf = example_nf();
        let xi = DVector::from_column_slice(&[0.2, 0.1]);
        let w = windowed_inverse_input(&nf, &[0.2], &xi, 0.5, 0.01).unwrap();
        assert_eq!(w, exact_inverse_input(&nf, &xi, 0.5, &DVector::zeros(2)));
    }

    #[test]
    fn kernel_matches_direct_window() {
        let nf = example_nf();
        let k = WindowKernel::new(&nf, 41, 0.01).unwrap();
        let window: Vec<f64> = (0..41).map(|i| (0.13 * i as f64).sin() + 0.3).collect();
        let direct = hidden_state_window(&nf, &window, 0.01).unwrap();
        assert!((k.apply(&window) - direct.eta).norm() < 1e-13);
        assert!((k.window_t() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn scalar_decay_bound() {
        // first-order zero at -3: G = (s + 3) / ((s + 1)(s + 2))
        let sys = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]),
            DVector::from_column_slice(&[0.0, 1.0]),
            RowDVector::from_row_slice(&[3.0, 1.0]),
        )
        .unwrap();
        let nf = normal_form(&sys, DEFAULT_TOL).unwrap();
        let grid = default_decay_grid(&nf).unwrap();
        let b = decay_bound(&nf, 2.0, &grid).unwrap();
        assert!((b.kappa1 - 1.0).abs() < 1e-12);
        assert!((b.alpha1 - 3.0 * (1.0 - ALPHA_MARGIN)).abs() < 1e-12);
        assert!((b.beta1 - 2.0 * 1.0 * 1.0 / b.alpha1).abs() < 1e-12);
    }

    #[test]
    fn example_decay_rate() {
        let nf = example_nf();
        let grid = default_decay_grid(&nf).unwrap();
        let b = decay_bound(&nf, 1.0, &grid).unwrap();
        let slow = (128.0 - (128.0f64.powi(2) - 7400.0).sqrt()) / 20.0;
        assert!((b.alpha1 - slow * (1.0 - ALPHA_MARGIN)).abs() < 1e-9);
        for &t in &grid {
            let lhs = spectral_norm(&(&nf.a4 * t).exp());
            assert!(lhs <= b.kappa1 * (-b.alpha1 * t).exp() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn nonminimum_phase_is_rejected() {
        // zero at +1
        let sys = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]),
            DVector::from_column_slice(&[0.0, 1.0]),
            RowDVector::from_row_slice(&[-1.0, 1.0]),
        )
        .unwrap();
        let nf = normal_form(&sys, DEFAULT_TOL).unwrap();
        let y = Trajectory::from_fn(0.01, 0.0, 10, "y", |_| 1.0).unwrap();
        assert!(matches!(hidden_state_full(&nf, &y), Err(Error::OperatorUnstable)));
        assert!(matches!(decay_bound(&nf, 1.0, &[0.0, 1.0]), Err(Error::NoExponentialBound)));
    }
}
