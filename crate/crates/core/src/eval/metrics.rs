//! Normalized prediction errors and their per-pool aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `max |u_hat - u_d| / max |u_d|`, in percent.
pub fn normalized_error(u_hat: &[f64], u_d: &[f64]) -> Result<f64> {
    if u_hat.len() != u_d.len() {
        return Err(Error::Dimension(format!("prediction has {} samples, reference {}", u_hat.len(), u_d.len())));
    }
    let peak = u_d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(peak > 0.0) {
        return Err(Error::NormalizationUndefined);
    }
    let worst = u_hat.iter().zip(u_d).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if !worst.is_finite() {
        return Err(Error::NonFinite("prediction"));
    }
    Ok(100.0 * worst / peak)
}

/// Errors of one hidden width over the evaluation trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthErrors {
    pub hidden: usize,
    pub per_trajectory: Vec<f64>,
    pub mean: f64,
    pub max: f64,
}

impl WidthErrors {
    pub fn new(hidden: usize, per_trajectory: Vec<f64>) -> Self {
        let n = per_trajectory.len().max(1) as f64;
        let mean = per_trajectory.iter().sum::<f64>() / n;
        let max = per_trajectory.iter().copied().fold(0.0f64, f64::max);
        Self { hidden, per_trajectory, mean, max }
    }
}

/// Per-width errors and the best width (smallest mean, ties to the smaller width).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub widths: Vec<WidthErrors>,
    pub best_hidden: usize,
    pub e_u: f64,
    pub e_bar_u: f64,
}

impl MetricReport {
    pub fn from_widths(mut widths: Vec<WidthErrors>) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::EmptyDataset("no hidden widths to report".into()));
        }
        widths.sort_by_key(|w| w.hidden);
        let errors: Vec<(usize, f64)> = widths.iter().map(|w| (w.hidden, w.mean)).collect();
        let best_hidden = argmin_width(&errors).expect("non-empty");
        let best = widths.iter().find(|w| w.hidden == best_hidden).expect("present");
        let (e_u, e_bar_u) = (best.mean, best.max);
        Ok(Self { widths, best_hidden, e_u, e_bar_u })
    }
}

/// Width with the smallest error; ties (and NaNs, which never win) go to the smaller width.
pub fn argmin_width(errors: &[(usize, f64)]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &(n, e) in errors {
        if e.is_nan() {
            continue;
        }
        best = match best {
            Some((bn, be)) if be < e || (be == e && bn < n) => Some((bn, be)),
            _ => Some((n, e)),
        };
    }
    best.map(|(n, _)| n)
        .or_else(|| errors.iter().map(|&(n, _)| n).min())
}
