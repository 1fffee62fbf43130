//! Excitation input, nominal evaluation trajectories, the four-stage
//! low-pass chain that yields smooth desired outputs with exact derivatives,
//! noise injection, and the five-point derivative stencils.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode;
use crate::trajectory::{Signal, Trajectory};

/// Channel names for the output and its derivatives, indexed by order.
pub const DERIVATIVE_CHANNELS: [&str; 5] = ["y", "dy", "ddy", "d3y", "d4y"];

/// Highest derivative order carried through datasets.
pub const MAX_DERIVATIVE: usize = 4;

/// Default filter cut-off, 1 Hz.
pub const DEFAULT_CUTOFF: f64 = 2.0 * PI;

/// Length of one excitation cycle and of each nominal trajectory, seconds.
pub const CYCLE_SECONDS: f64 = 10.0;

/// `(f_i, alpha_i)` for the 20 default excitation cycles.
pub const DEFAULT_CYCLES: [(f64, f64); 20] = [
    (6.0, 0.75),
    (3.0, 0.5),
    (2.0, 0.5),
    (0.5, 0.5),
    (0.5, 0.3),
    (0.3, 0.3),
    (0.1, 0.3),
    (0.5, -0.3),
    (0.3, -0.3),
    (0.1, -0.3),
    (1.0, 0.25),
    (0.5, 0.25),
    (1.0, -0.1),
    (0.5, -0.05),
    (0.5, 0.1),
    (0.5, -0.1),
    (2.0, 0.25),
    (1.0, 0.1),
    (0.5, 0.05),
    (1.0, 0.5),
];

pub fn derivative_channel(order: usize) -> &'static str {
    DERIVATIVE_CHANNELS[order]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSpec {
    pub cycles: Vec<(f64, f64)>,
    #[serde(default = "default_cycle_duration")]
    pub cycle_duration: f64,
}

fn default_cycle_duration() -> f64 {
    CYCLE_SECONDS
}

impl Default for ExcitationSpec {
    fn default() -> Self {
        Self { cycles: DEFAULT_CYCLES.to_vec(), cycle_duration: CYCLE_SECONDS }
    }
}

impl ExcitationSpec {
    pub fn duration(&self) -> f64 {
        self.cycles.len() as f64 * self.cycle_duration
    }

    /// Parses `f, alpha` pairs, one per line; `#` starts a comment.
    pub fn parse_pairs(text: &str) -> Result<Self> {
        let mut cycles = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
            if parts.len() != 2 {
                return Err(Error::Parse(format!("line {}: expected `f, alpha`", i + 1)));
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)));
            cycles.push((parse(parts[0])?, parse(parts[1])?));
        }
        if cycles.is_empty() {
            return Err(Error::Parse("no excitation cycles".into()));
        }
        Ok(Self { cycles, cycle_duration: CYCLE_SECONDS })
    }

    /// Value of the concatenated signal; zero outside `[0, duration]`.
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.duration() {
            return 0.0;
        }
        let idx = ((t / self.cycle_duration).floor() as usize).min(self.cycles.len() - 1);
        let local = (t - idx as f64 * self.cycle_duration).clamp(0.0, self.cycle_duration);
        let (f, alpha) = self.cycles[idx];
        cycle_value(f, alpha, local * CYCLE_SECONDS / self.cycle_duration)
    }
}

impl Signal for ExcitationSpec {
    fn value(&self, t: f64) -> f64 {
        ExcitationSpec::value(self, t)
    }
}

fn step_part(t: f64) -> f64 {
    if (2.0..4.0).contains(&t) {
        1.0
    } else if (4.0..6.0).contains(&t) {
        -0.9
    } else if (6.0..8.0).contains(&t) {
        0.5
    } else {
        0.0
    }
}

fn ramp_part(t: f64) -> f64 {
    if t < 1.0 {
        0.4 * t
    } else if t < 9.0 {
        0.4
    } else {
        ramp_part(10.0 - t)
    }
}

fn cycle_value(f: f64, alpha: f64, t: f64) -> f64 {
    let c = f / 10.0;
    alpha * (4.0 * (PI * c * t * t).sin() + step_part(t) + ramp_part(t))
}

/// One excitation cycle `alpha [4 sin(pi (f/10) t^2) + s(t) + r(t)]` on `[0, 10]`.
pub fn excitation_cycle(f: f64, alpha: f64, t: f64) -> Result<f64> {
    if !(0.0..=CYCLE_SECONDS).contains(&t) {
        return Err(Error::Domain(format!("excitation cycle time {t} outside [0, 10]")));
    }
    Ok(cycle_value(f, alpha, t))
}

/// Samples the concatenated excitation into a `u` channel.
pub fn excitation_signal(spec: &ExcitationSpec, dt: f64) -> Result<Trajectory> {
    let per_cycle = spec.cycle_duration / dt;
    if (per_cycle - per_cycle.round()).abs() > 1e-9 * per_cycle {
        return Err(Error::Domain(format!("dt = {dt} does not divide the cycle length")));
    }
    let len = spec.cycles.len() * per_cycle.round() as usize + 1;
    Trajectory::from_fn(dt, 0.0, len, "u", |t| spec.value(t))
}

/// Nominal evaluation trajectory `y_{0,k}(t)` for `k = 1..=10`, `t` in `[0, 10]`.
pub fn nominal_trajectory(k: usize, t: f64) -> Result<f64> {
    if !(1..=10).contains(&k) {
        return Err(Error::Domain(format!("trajectory index {k} outside 1..=10")));
    }
    if !(0.0..=CYCLE_SECONDS).contains(&t) {
        return Err(Error::Domain(format!("trajectory time {t} outside [0, 10]")));
    }
    Ok(nominal_value(k, t))
}

fn nominal_value(k: usize, t: f64) -> f64 {
    let within = |lo: f64, hi: f64| (lo..hi).contains(&t);
    match k {
        1 => {
            if within(1.0, 3.0) {
                0.4 * (t - 1.0)
            } else if within(3.0, 6.0) {
                0.8
            } else if within(6.0, 8.0) {
                0.4 * (8.0 - t)
            } else {
                0.0
            }
        }
        2 => {
            if within(2.0, 3.0) {
                t - 2.0
            } else if within(3.0, 5.0) {
                3.7 - 0.9 * t
            } else if within(5.0, 7.0) {
                t - 5.8
            } else if within(7.0, 8.0) {
                1.2 * (8.0 - t)
            } else {
                0.0
            }
        }
        3 => {
            if within(2.0, 4.0) || within(6.0, 8.0) {
                1.0
            } else if within(4.0, 6.0) {
                -1.0
            } else {
                0.0
            }
        }
        4 => {
            if within(1.0, 2.5) {
                2.0 * (t - 1.0) / 3.0
            } else if within(2.5, 4.0) {
                2.0 * (4.0 - t) / 3.0
            } else if within(4.0, 5.0) {
                8.0 * (t - 4.0) / 15.0
            } else if within(5.0, 6.0) {
                8.0 * (6.0 - t) / 15.0
            } else if within(6.0, 7.5) {
                0.4 * (t - 6.0)
            } else if within(7.5, 9.0) {
                0.4 * (9.0 - t)
            } else {
                0.0
            }
        }
        5 => 0.001 * (t.max(0.0).powf(3.2) - t * t),
        6 => (0.4 * PI * t).sin() - 0.9 * (0.6 * PI * t).sin() + 0.2 * (PI * t).sin(),
        7 => 1.5 * (0.7 * PI * t).sin() - 0.5 * (0.4 * PI * t).sin(),
        8 => -0.5 * (0.3 * PI * t).sin() - 0.6 * (0.7 * PI * t).sin() + 0.2 * (1.2 * PI * t).sin(),
        9 => 0.7 * (0.26 * PI * t).sin() + 0.3 * (1.3 * PI * t).sin() - 0.2 * (1.4 * PI * t).sin(),
        10 => 0.35 * t.max(0.0).powf(1.5).sin(),
        _ => unreachable!(),
    }
}

/// Signal view of a nominal trajectory, clamped to the `[0, 10]` definition interval.
#[derive(Clone, Copy, Debug)]
pub struct Nominal(pub usize);

impl Signal for Nominal {
    fn value(&self, t: f64) -> f64 {
        nominal_value(self.0, t.clamp(0.0, CYCLE_SECONDS))
    }
}

/// Output of the four-stage low-pass chain.
#[derive(Clone, Debug)]
pub struct FilteredTrajectory {
    /// Channels [`DERIVATIVE_CHANNELS`]: `y_d` and its derivatives through order 4.
    pub derivatives: Trajectory,
    /// Channels `y0, y1, y2, y3`: chain input and the first three stage outputs.
    pub stages: Trajectory,
    pub cutoff: f64,
}

impl FilteredTrajectory {
    pub fn channel(&self, order: usize) -> Vec<f64> {
        self.derivatives.column(order)
    }

    /// Same trajectory scaled by `factor` (the chain is linear).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let d = &self.derivatives;
        let s = &self.stages;
        Ok(Self {
            derivatives: Trajectory::new(d.dt(), d.t0(), d.channels().to_vec(), d.samples() * factor)?,
            stages: Trajectory::new(s.dt(), s.t0(), s.channels().to_vec(), s.samples() * factor)?,
            cutoff: self.cutoff,
        })
    }
}

/// Maps `[y_d, y3, y2, y1, y0]` to `[y_d, y_d', y_d'', y_d''', y_d'''']`.
pub fn derivative_matrix(a: f64) -> DMatrix<f64> {
    let (a2, a3, a4) = (a * a, a * a * a, a * a * a * a);
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(5, 5, &[
        1.0, 0.0, 0.0, 0.0, 0.0,
        -a, a, 0.0, 0.0, 0.0,
        a2, -2.0 * a2, a2, 0.0, 0.0,
        -a3, 3.0 * a3, -3.0 * a3, a3, 0.0,
        a4, -4.0 * a4, 6.0 * a4, -4.0 * a4, a4,
    ]);
    m
}

/// Runs `y0` through four cascaded `a / (s + a)` stages on the grid
/// `t0 + i dt`, `i < len`, with every stage starting at `y0(t0)`.
pub fn filter_signal<S: Signal + ?Sized>(y0: &S, t0: f64, dt: f64, len: usize, a: f64) -> Result<FilteredTrajectory> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("cut-off must be positive, got {a}")));
    }
    if len == 0 {
        return Err(Error::Domain("filter needs at least one sample".into()));
    }
    // state = [y1, y2, y3, y_d]
    #[rustfmt::skip]
    let chain = DMatrix::from_row_slice(4, 4, &[
        -a, 0.0, 0.0, 0.0,
        a, -a, 0.0, 0.0,
        0.0, a, -a, 0.0,
        0.0, 0.0, a, -a,
    ]);
    let input = DVector::from_column_slice(&[a, 0.0, 0.0, 0.0]);
    let x0 = DVector::from_element(4, y0.value(t0));
    let states = ode::integrate_linear(&chain, &input, |t| y0.value(t), &x0, t0, dt, len - 1)
        .map_err(|t| Error::SimulationDiverged { t })?;
    let mix = derivative_matrix(a);
    let mut deriv = DMatrix::zeros(len, 5);
    let mut stages = DMatrix::zeros(len, 4);
    for (i, x) in states.iter().enumerate() {
        let u = y0.value(t0 + i as f64 * dt);
        let v = DVector::from_column_slice(&[x[3], x[2], x[1], x[0], u]);
        let d = &mix * v;
        deriv.set_row(i, &d.transpose());
        stages[(i, 0)] = u;
        stages[(i, 1)] = x[0];
        stages[(i, 2)] = x[1];
        stages[(i, 3)] = x[2];
    }
    Ok(FilteredTrajectory {
        derivatives: Trajectory::new(dt, t0, DERIVATIVE_CHANNELS.iter().map(|s| s.to_string()).collect(), deriv)?,
        stages: Trajectory::new(dt, t0, ["y0", "y1", "y2", "y3"].iter().map(|s| s.to_string()).collect(), stages)?,
        cutoff: a,
    })
}

/// [`filter_signal`] applied to the first channel of a sampled trajectory.
pub fn filter_chain(y0: &Trajectory, a: f64) -> Result<FilteredTrajectory> {
    let sig = |t: f64| y0.interpolate(0, t);
    filter_signal(&sig, y0.t0(), y0.dt(), y0.len(), a)
}

/// The ten filtered evaluation trajectories on `[0, 10]`.
pub fn evaluation_suite(dt: f64, a: f64) -> Result<Vec<FilteredTrajectory>> {
    let len = (CYCLE_SECONDS / dt).round() as usize + 1;
    (1..=10).map(|k| filter_signal(&Nominal(k), 0.0, dt, len, a)).collect()
}

/// Signal-to-noise ratio, in decibels or as a plain power ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Snr {
    Db(f64),
    Linear(f64),
}

impl Snr {
    pub fn as_db(&self) -> f64 {
        match *self {
            Snr::Db(db) => db,
            Snr::Linear(ratio) => 10.0 * ratio.log10(),
        }
    }
}

impl Default for Snr {
    fn default() -> Self {
        Snr::Db(20.0)
    }
}

/// Adds white Gaussian noise to every channel at the requested SNR (dB).
pub fn add_awgn(y: &Trajectory, snr_db: f64, seed: u64) -> Result<Trajectory> {
    let names: Vec<&str> = y.channels().iter().map(String::as_str).collect();
    add_awgn_channels(y, &names, snr_db, seed)
}

/// Adds independent white Gaussian noise to the named channels only.
///
/// Each channel gets variance `P / 10^(snr_db / 10)` where `P` is the mean
/// square of that channel. Draws follow channel order from a single seeded stream.
pub fn add_awgn_channels(y: &Trajectory, names: &[&str], snr_db: f64, seed: u64) -> Result<Trajectory> {
    if snr_db == f64::INFINITY {
        return Ok(y.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = y.clone();
    for name in names {
        let values = y.channel(name)?;
        let power = values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64;
        if power <= 0.0 {
            return Err(Error::SnrUndefined(name.to_string()));
        }
        let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
        let noisy: Vec<f64> = values.iter().map(|v| v + normal.sample(&mut rng)).collect();
        out = out.with_channel(name, &noisy)?;
    }
    Ok(out)
}

/// Third and fourth derivatives from second-derivative samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil34 {
    pub d3: Vec<f64>,
    pub d4: Vec<f64>,
    /// Indices with a full five-point stencil; entries outside are zero and invalid.
    pub valid: std::ops::Range<usize>,
}

/// Five-point central stencils applied to `yddot`:
///
/// ```text
/// y3[m] = (-a[m+2] + 8 a[m+1] - 8 a[m-1] + a[m-2]) / (12 dt)
/// y4[m] = (-a[m+2] + 16 a[m+1] - 30 a[m] + 16 a[m-1] - a[m-2]) / (12 dt^2)
/// ```
pub fn finite_difference_34(yddot: &[f64], dt: f64) -> Result<Stencil34> {
    let n = yddot.len();
    if n < 5 {
        return Err(Error::Domain(format!("five-point stencil needs >= 5 samples, got {n}")));
    }
    let mut d3 = vec![0.0; n];
    let mut d4 = vec![0.0; n];
    for m in 2..n - 2 {
        let (p2, p1, c, m1, m2) = (yddot[m + 2], yddot[m + 1], yddot[m], yddot[m - 1], yddot[m - 2]);
        d3[m] = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * dt);
        d4[m] = (-p2 + 16.0 * p1 - 30.0 * c + 16.0 * m1 - m2) / (12.0 * dt * dt);
    }
    Ok(Stencil34 { d3, d4, valid: 2..n - 2 })
}
