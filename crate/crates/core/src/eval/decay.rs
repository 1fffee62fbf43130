//! Hidden-state reconstruction error versus window length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverse::{decay_bound, default_decay_grid, hidden_state_full, DecayBound, WindowKernel};
use crate::lti::NormalForm;
use crate::trajectory::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    /// Window length `T`, seconds.
    pub window: f64,
    /// `max_m ||eta[m] - eta_hat[m]||` over the record.
    pub max_error: f64,
    /// `beta1 exp(-alpha1 T)`.
    pub bound: f64,
}

/// Least-squares line through `(x, ln y)`: `y ~ beta exp(-alpha x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub beta: f64,
    pub alpha: f64,
    /// Root-mean-square residual of `ln y`.
    pub residual: f64,
    pub points: usize,
}

pub fn fit_exponential(x: &[f64], y: &[f64]) -> Result<ExpFit> {
    if x.len() != y.len() {
        return Err(Error::Dimension("fit abscissa and ordinate differ in length".into()));
    }
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, v)| **v > 0.0 && v.is_finite()).map(|(a, b)| (*a, b.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::Domain(format!("exponential fit needs two positive points, got {}", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Domain("exponential fit needs distinct abscissae".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(ExpFit { beta: intercept.exp(), alpha: -slope, residual, points: pts.len() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayExperiment {
    pub points: Vec<DecayPoint>,
    pub bound: DecayBound,
    pub fit: ExpFit,
}

impl DecayExperiment {
    pub fn within_bound(&self) -> bool {
        self.points.iter().all(|p| p.max_error <= p.bound)
    }
}

/// Compares the windowed hidden-state estimate with the full-history one
/// along an output record that starts from rest, for each window length.
pub fn hidden_state_decay(nf: &NormalForm, y: &Trajectory, windows: &[f64]) -> Result<DecayExperiment> {
    if nf.hidden_dim() == 0 {
        return Err(Error::Domain("system has no hidden states".into()));
    }
    let dt = y.dt();
    let ys = y.channel("y")?;
    let eta = hidden_state_full(nf, y)?;
    let m = ys.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let bound = decay_bound(nf, m, &default_decay_grid(nf)?)?;
    let mut points = Vec::with_capacity(windows.len());
    for &t in windows {
        let steps = (t / dt).round() as usize;
        if steps == 0 || ((steps as f64) * dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::Domain(format!("window {t} is not a positive multiple of {dt}")));
        }
        if steps >= ys.len() {
            return Err(Error::Domain(format!("window {t} is longer than the record")));
        }
        let kernel = WindowKernel::new(nf, steps + 1, dt)?;
        let mut worst = 0.0f64;
        for k in steps..ys.len() {
            let est = kernel.apply(&ys[k - steps..=k]);
            let err = (0..nf.hidden_dim()).map(|i| (eta.samples()[(k, i)] - est[i]).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(err);
        }
        points.push(DecayPoint { window: t, max_error: worst, bound: bound.eta_bound(t) });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.window).collect();
    let es: Vec<f64> = points.iter().map(|p| p.max_error).collect();
    let fit = fit_exponential(&xs, &es)?;
    Ok(DecayExperiment { points, bound, fit })
}
