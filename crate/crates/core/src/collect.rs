//! Training-data collection: drive the plant with the excitation and record
//! the input, the output and its derivatives through order four.
//!
//! Derivatives up to the relative degree come from the state (`C A^j x`, plus
//! `C A^(r-1) B u` at order `r`); higher orders come from the five-point
//! stencils on the second derivative. Stencil boundary samples are dropped.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::lti::{relative_degree, simulate, StateSpace, DEFAULT_TOL};
use crate::signals::{add_awgn_channels, finite_difference_34, DERIVATIVE_CHANNELS, MAX_DERIVATIVE};
use crate::trajectory::{Signal, Trajectory};

/// Channels of a collected record, in order.
pub fn record_channels() -> Vec<String> {
    std::iter::once("u").chain(DERIVATIVE_CHANNELS).map(str::to_string).collect()
}

/// Simulates from rest and returns channels `u, y, dy, ddy, d3y, d4y`.
pub fn collect_record<S: Signal + ?Sized>(sys: &StateSpace, input: &S, dt: f64, duration: f64) -> Result<Trajectory> {
    let n = sys.order();
    let r = relative_degree(sys, DEFAULT_TOL)?;
    let sim = simulate(sys, input, &DVector::zeros(n), dt, duration)?;
    let len = sim.len();
    if len < 5 {
        return Err(Error::Domain("record too short for derivative stencils".into()));
    }
    let u = sim.channel("u")?;
    let states: Vec<DVector<f64>> = (0..len)
        .map(|k| DVector::from_iterator(n, (0..n).map(|i| sim.samples()[(k, 1 + i)])))
        .collect();

    let mut derivs: Vec<Vec<f64>> = vec![vec![0.0; len]; MAX_DERIVATIVE + 1];
    let analytic_top = r.min(MAX_DERIVATIVE);
    for j in 0..=analytic_top {
        let row = sys.output_row(j);
        let feed = if j == r { sys.markov(r - 1) } else { 0.0 };
        for k in 0..len {
            derivs[j][k] = (&row * &states[k])[0] + feed * u[k];
        }
    }
    if r < 2 {
        // second derivative from the first by central differences
        let d1 = derivs[1].clone();
        for k in 1..len - 1 {
            derivs[2][k] = (d1[k + 1] - d1[k - 1]) / (2.0 * dt);
        }
        derivs[2][0] = (d1[1] - d1[0]) / dt;
        derivs[2][len - 1] = (d1[len - 1] - d1[len - 2]) / dt;
    }
    let stencil = finite_difference_34(&derivs[2], dt)?;
    if r < 3 {
        derivs[3] = stencil.d3.clone();
    }
    if r < 4 {
        derivs[4] = stencil.d4.clone();
    }

    let mut record = Trajectory::from_channel(dt, 0.0, "u", &u)?;
    for (j, name) in DERIVATIVE_CHANNELS.iter().enumerate() {
        record = record.with_channel(name, &derivs[j])?;
    }
    record.slice(stencil.valid.start, stencil.valid.end)
}

/// Adds independent noise to the output and derivative channels; the input stays clean.
pub fn with_output_noise(record: &Trajectory, snr_db: f64, seed: u64) -> Result<Trajectory> {
    add_awgn_channels(record, &DERIVATIVE_CHANNELS, snr_db, seed)
}
