//! Two-layer feedforward network: tanh hidden layer, linear output, inputs
//! and target scaled to `[-1, 1]` by per-column min/max.
//!
//! Training is damped Gauss-Newton (Levenberg-Marquardt) on the mean squared
//! error, with early stopping on a validation split made of the tail of every
//! excitation cycle.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{Dataset, FeatureSpec};
use crate::error::{Error, Result};
use crate::trajectory::write_atomic;

/// Affine map of each column from `[lo, hi]` onto `[-1, 1]`.
///
/// A constant column (`hi == lo`) is shifted by `lo` and not scaled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl MinMax {
    /// Column ranges of the given rows of `x`.
    pub fn fit(x: &DMatrix<f64>, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset("no rows to fit normalization".into()));
        }
        let mut lo = vec![f64::INFINITY; x.ncols()];
        let mut hi = vec![f64::NEG_INFINITY; x.ncols()];
        for &i in rows {
            for j in 0..x.ncols() {
                let v = x[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite("training features"));
                }
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> usize {
        self.lo.len()
    }

    fn gain(&self, j: usize) -> f64 {
        let span = self.hi[j] - self.lo[j];
        if span > 0.0 {
            2.0 / span
        } else {
            1.0
        }
    }

    pub fn forward(&self, j: usize, v: f64) -> f64 {
        (v - self.lo[j]) * self.gain(j) - 1.0
    }

    pub fn inverse(&self, j: usize, v: f64) -> f64 {
        (v + 1.0) / self.gain(j) + self.lo[j]
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| !(h > l))
    }
}

/// Trained network with frozen normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    /// Hidden weights, `hidden x width`.
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DVector<f64>,
    pub b2: f64,
    pub input_norm: MinMax,
    pub output_norm: MinMax,
    pub seed: u64,
    /// Feature layout the model was trained on, with its base sample period.
    pub spec: Option<(FeatureSpec, f64)>,
}

impl MlpModel {
    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn width(&self) -> usize {
        self.w1.ncols()
    }

    fn check_width(&self, got: usize) -> Result<()> {
        if got != self.width() {
            return Err(Error::WidthMismatch { expected: self.width(), got });
        }
        Ok(())
    }

    fn output(&self, z: f64) -> f64 {
        self.output_norm.inverse(0, z)
    }

    /// Network output for one feature vector, in target units.
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        self.check_width(features.len())?;
        let x = DVector::from_iterator(features.len(), features.iter().enumerate().map(|(j, v)| self.input_norm.forward(j, *v)));
        let h = (&self.w1 * x + &self.b1).map(f64::tanh);
        Ok(self.output(h.dot(&self.w2) + self.b2))
    }

    /// Row-wise prediction.
    pub fn predict_batch(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_width(x.ncols())?;
        let xn = normalized(x, &self.input_norm, None);
        let z = raw_forward(&xn, &self.w1, &self.b1, &self.w2, self.b2).1;
        Ok(z.map(|v| self.output(v)))
    }

    /// Rejects a feature layout other than the one the model was trained on.
    pub fn check_spec(&self, spec: &FeatureSpec, base_dt: f64) -> Result<()> {
        match &self.spec {
            Some((s, dt)) if s == spec && (dt - base_dt).abs() <= 1e-12 * base_dt.abs().max(1.0) => Ok(()),
            Some((s, dt)) => Err(Error::IncompatibleSpec(format!(
                "model trained for {} (T={}, tap={}, l={}, base dt={dt}), requested {} (T={}, tap={}, l={}, base dt={base_dt})",
                s.operator_label(),
                s.window,
                s.tap_dt,
                s.order,
                spec.operator_label(),
                spec.window,
                spec.tap_dt,
                spec.order
            ))),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.into_model()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

const MODEL_FORMAT: &str = "koopinv-mlp";
const MODEL_VERSION: u32 = 1;

/// On-disk layout of [`MlpModel`]; weights are stored row by row.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    hidden: usize,
    width: usize,
    seed: u64,
    feature_spec: Option<FeatureSpec>,
    base_dt: Option<f64>,
    input_min: Vec<f64>,
    input_max: Vec<f64>,
    output_min: f64,
    output_max: f64,
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl From<&MlpModel> for ModelFile {
    fn from(m: &MlpModel) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            hidden: m.hidden(),
            width: m.width(),
            seed: m.seed,
            feature_spec: m.spec.map(|s| s.0),
            base_dt: m.spec.map(|s| s.1),
            input_min: m.input_norm.lo.clone(),
            input_max: m.input_norm.hi.clone(),
            output_min: m.output_norm.lo[0],
            output_max: m.output_norm.hi[0],
            w1: m.w1.row_iter().map(|r| r.iter().copied().collect()).collect(),
            b1: m.b1.iter().copied().collect(),
            w2: m.w2.iter().copied().collect(),
            b2: m.b2,
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<MlpModel> {
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return Err(Error::IncompatibleSpec(format!(
                "model file format {} v{}, expected {MODEL_FORMAT} v{MODEL_VERSION}",
                self.format, self.version
            )));
        }
        let (n, d) = (self.hidden, self.width);
        let shape_ok = self.w1.len() == n
            && self.w1.iter().all(|r| r.len() == d)
            && self.b1.len() == n
            && self.w2.len() == n
            && self.input_min.len() == d
            && self.input_max.len() == d;
        if !shape_ok {
            return Err(Error::Parse("model file dimensions are inconsistent".into()));
        }
        let spec = match (self.feature_spec, self.base_dt) {
            (Some(s), Some(dt)) => Some((s, dt)),
            (None, None) => None,
            _ => return Err(Error::Parse("feature spec and base period must appear together".into())),
        };
        let model = MlpModel {
            w1: DMatrix::from_row_iterator(n, d, self.w1.into_iter().flatten()),
            b1: DVector::from_vec(self.b1),
            w2: DVector::from_vec(self.w2),
            b2: self.b2,
            input_norm: MinMax { lo: self.input_min, hi: self.input_max },
            output_norm: MinMax { lo: vec![self.output_min], hi: vec![self.output_max] },
            seed: self.seed,
            spec,
        };
        if !finite_weights(&model) {
            return Err(Error::NonFinite("model weights"));
        }
        Ok(model)
    }
}

fn finite_weights(m: &MlpModel) -> bool {
    m.w1.iter().chain(m.b1.iter()).chain(m.w2.iter()).all(|v| v.is_finite()) && m.b2.is_finite()
}

/// Training settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Maximum damped Gauss-Newton iterations.
    pub max_iters: usize,
    /// Stop after this many iterations without a new best validation error.
    pub max_fail: usize,
    pub mu_init: f64,
    pub mu_decrease: f64,
    pub mu_increase: f64,
    pub mu_max: f64,
    /// Coefficient of the squared parameter norm added to the sum of squared errors.
    pub weight_decay: f64,
    /// After training, re-solve the output layer by least squares on every
    /// training row (not only the strided ones); kept if validation improves.
    pub refit_output: bool,
    /// Use every `row_stride`-th dataset row.
    pub row_stride: usize,
    /// Fraction at the end of each cycle held out for validation.
    pub validation_fraction: f64,
    /// Cycle length in seconds used to place the validation blocks.
    pub cycle_seconds: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iters: 40,
            max_fail: 6,
            mu_init: 1e-3,
            mu_decrease: 0.1,
            mu_increase: 10.0,
            mu_max: 1e10,
            weight_decay: 0.0,
            refit_output: true,
            row_stride: 20,
            validation_fraction: 0.15,
            cycle_seconds: crate::signals::CYCLE_SECONDS,
        }
    }
}

impl TrainConfig {
    /// Defaults for noisy training data: the same schedule with weight decay.
    pub fn noisy() -> Self {
        Self { weight_decay: 1.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters >= 1
            && self.row_stride >= 1
            && self.mu_init > 0.0
            && self.mu_decrease > 0.0
            && self.mu_decrease < 1.0
            && self.mu_increase > 1.0
            && self.mu_max > self.mu_init
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.validation_fraction)
            && self.cycle_seconds > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid training configuration {self:?}")))
        }
    }
}

/// Summary of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub iterations: usize,
    pub train_mse: f64,
    pub validation_mse: f64,
    pub train_rows: usize,
    pub validation_rows: usize,
}

/// Splits rows into training and validation by position within each cycle.
///
/// Falls back to a trailing block of rows when the cycle rule leaves either
/// side empty.
pub fn split_rows(times: &[f64], cfg: &TrainConfig) -> (Vec<usize>, Vec<usize>) {
    let cut = (1.0 - cfg.validation_fraction) * cfg.cycle_seconds;
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (i, t) in times.iter().enumerate() {
        let phase = t.rem_euclid(cfg.cycle_seconds);
        if phase >= cut - 1e-9 {
            val.push(i);
        } else {
            train.push(i);
        }
    }
    if cfg.validation_fraction > 0.0 && (train.is_empty() || val.is_empty()) {
        let n = times.len();
        let nv = ((n as f64 * cfg.validation_fraction).round() as usize).clamp(1, n.saturating_sub(1));
        train = (0..n - nv).collect();
        val = (n - nv..n).collect();
    }
    if cfg.validation_fraction == 0.0 {
        train = (0..times.len()).collect();
        val.clear();
    }
    (train, val)
}

fn normalized(x: &DMatrix<f64>, norm: &MinMax, rows: Option<&[usize]>) -> DMatrix<f64> {
    match rows {
        Some(rows) => DMatrix::from_fn(rows.len(), x.ncols(), |i, j| norm.forward(j, x[(rows[i], j)])),
        None => DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| norm.forward(j, x[(i, j)])),
    }
}

/// Hidden activations and output for normalized inputs.
fn raw_forward(x: &DMatrix<f64>, w1: &DMatrix<f64>, b1: &DVector<f64>, w2: &DVector<f64>, b2: f64) -> (DMatrix<f64>, DVector<f64>) {
    let mut h = x * w1.transpose();
    for (j, mut col) in h.column_iter_mut().enumerate() {
        col.apply(|v| *v = (*v + b1[j]).tanh());
    }
    let z = (&h * w2).add_scalar(b2);
    (h, z)
}

/// Flat parameter vector: `w1` row by row, then `b1`, `w2`, `b2`.
struct Params {
    n: usize,
    d: usize,
    theta: DVector<f64>,
}

impl Params {
    fn init(n: usize, d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let in_scale = 1.0 / (d as f64).sqrt();
        let out_scale = 1.0 / (n as f64).sqrt();
        let count = n * d + 2 * n + 1;
        let theta = DVector::from_iterator(
            count,
            (0..count).map(|k| {
                let s = if k < n * d + n { in_scale } else { out_scale };
                rng.random_range(-s..=s)
            }),
        );
        Self { n, d, theta }
    }

    fn len(&self) -> usize {
        self.theta.len()
    }

    fn unpack(&self, theta: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>, DVector<f64>, f64) {
        let (n, d) = (self.n, self.d);
        let w1 = DMatrix::from_row_slice(n, d, &theta.as_slice()[..n * d]);
        let b1 = DVector::from_column_slice(&theta.as_slice()[n * d..n * d + n]);
        let w2 = DVector::from_column_slice(&theta.as_slice()[n * d + n..n * d + 2 * n]);
        (w1, b1, w2, theta[n * d + 2 * n])
    }

    fn residual(&self, theta: &DVector<f64>, x: &DMatrix<f64>, y: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let (w1, b1, w2, b2) = self.unpack(theta);
        let (h, z) = raw_forward(x, &w1, &b1, &w2, b2);
        (h, z - y)
    }

    /// Least-squares output layer for fixed hidden weights.
    fn refit_output(&self, theta: &DVector<f64>, x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
        let (w1, b1, _, _) = self.unpack(theta);
        let (h, _) = raw_forward(x, &w1, &b1, &DVector::zeros(self.n), 0.0);
        let a = h.insert_column(self.n, 1.0);
        let sol = a.svd(true, true).solve(y, 1e-12).ok()?;
        if !sol.iter().all(|v| v.is_finite()) {
            return None;
        }
        let mut out = theta.clone();
        let base = self.n * self.d + self.n;
        out.rows_mut(base, self.n + 1).copy_from(&sol);
        Some(out)
    }

    /// Jacobian of the network output with respect to the parameters.
    fn jacobian(&self, theta: &DVector<f64>, x: &DMatrix<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
        let (n, d) = (self.n, self.d);
        let w2 = &theta.as_slice()[n * d + n..n * d + 2 * n];
        let rows = x.nrows();
        let mut j = DMatrix::zeros(rows, self.len());
        for k in 0..n {
            for i in 0..rows {
                let hk = h[(i, k)];
                let g = (1.0 - hk * hk) * w2[k];
                j[(i, n * d + k)] = g;
                j[(i, n * d + n + k)] = hk;
            }
            for c in 0..d {
                let col = k * d + c;
                for i in 0..rows {
                    let hk = h[(i, k)];
                    j[(i, col)] = (1.0 - hk * hk) * w2[k] * x[(i, c)];
                }
            }
        }
        j.column_mut(self.len() - 1).fill(1.0);
        j
    }
}

/// Damped Gauss-Newton step for `|r|^2 + lambda |theta|^2`:
/// `(J'J + (mu + lambda) I)^-1 (J' r + lambda theta)`, solved in parameter or
/// row space, whichever is smaller.
fn lm_step(j: &DMatrix<f64>, r: &DVector<f64>, theta: &DVector<f64>, gram: &Gram, mu: f64, lambda: f64) -> Option<DVector<f64>> {
    let c = mu + lambda;
    match gram {
        Gram::Params(a) => {
            let mut m = a.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += c;
            }
            let mut g = j.transpose() * r;
            if lambda > 0.0 {
                g.axpy(lambda, theta, 1.0);
            }
            m.cholesky().map(|f| f.solve(&g))
        }
        Gram::Rows(a) => {
            let mut m = a.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += c;
            }
            let f = m.cholesky()?;
            if lambda > 0.0 {
                // push-through identity applied to both terms of the right-hand side
                let rhs = r - (j * theta) * (lambda / c);
                let mut step = j.transpose() * f.solve(&rhs);
                step.axpy(lambda / c, theta, 1.0);
                Some(step)
            } else {
                Some(j.transpose() * f.solve(r))
            }
        }
    }
}

enum Gram {
    /// `J'J`
    Params(DMatrix<f64>),
    /// `J J'`
    Rows(DMatrix<f64>),
}

fn mse(r: &DVector<f64>) -> f64 {
    if r.is_empty() {
        0.0
    } else {
        r.norm_squared() / r.len() as f64
    }
}

/// Trains a network with `hidden` tanh units. Deterministic in `seed`.
pub fn train_mlp(ds: &Dataset, hidden: usize, seed: u64, cfg: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    if hidden == 0 {
        return Err(Error::Domain("hidden width must be at least 1".into()));
    }
    if ds.is_empty() {
        return Err(Error::EmptyDataset("no training rows".into()));
    }
    let (train_all, val_all) = split_rows(&ds.times, cfg);
    let input_norm = MinMax::fit(&ds.x, &train_all)?;
    let target = DMatrix::from_column_slice(ds.len(), 1, ds.y.as_slice());
    let output_norm = MinMax::fit(&target, &train_all)?;
    let train: Vec<usize> = train_all.iter().copied().step_by(cfg.row_stride).collect();
    let val: Vec<usize> = val_all.iter().copied().step_by(cfg.row_stride).collect();

    let xt = normalized(&ds.x, &input_norm, Some(&train));
    let yt = DVector::from_iterator(train.len(), train.iter().map(|&i| output_norm.forward(0, ds.y[i])));
    let xv = normalized(&ds.x, &input_norm, Some(&val));
    let yv = DVector::from_iterator(val.len(), val.iter().map(|&i| output_norm.forward(0, ds.y[i])));

    let params = Params::init(hidden, ds.width(), seed);
    let mut theta = params.theta.clone();
    let mut best = theta.clone();
    let mut mu = cfg.mu_init;
    let (mut h, mut r) = params.residual(&theta, &xt, &yt);
    let lambda = cfg.weight_decay;
    let objective = |r: &DVector<f64>, theta: &DVector<f64>| r.norm_squared() + lambda * theta.norm_squared();
    let mut loss = objective(&r, &theta);
    let mut best_val = if val.is_empty() { f64::INFINITY } else { mse(&params.residual(&theta, &xv, &yv).1) };
    let mut fails = 0;
    let mut iterations = 0;
    let row_space = params.len() > train.len();

    while iterations < cfg.max_iters {
        if !loss.is_finite() {
            return Err(Error::TrainingFailed(format!("loss became non-finite at iteration {iterations}")));
        }
        let j = params.jacobian(&theta, &xt, &h);
        let gram = if row_space { Gram::Rows(&j * j.transpose()) } else { Gram::Params(j.transpose() * &j) };
        let mut accepted = false;
        while mu <= cfg.mu_max {
            if let Some(step) = lm_step(&j, &r, &theta, &gram, mu, lambda) {
                let candidate = &theta - step;
                let (h2, r2) = params.residual(&candidate, &xt, &yt);
                let s2 = objective(&r2, &candidate);
                if s2 < loss {
                    theta = candidate;
                    h = h2;
                    r = r2;
                    loss = s2;
                    mu *= cfg.mu_decrease;
                    accepted = true;
                    break;
                }
            }
            mu *= cfg.mu_increase;
        }
        if !accepted {
            break;
        }
        iterations += 1;
        if val.is_empty() {
            best = theta.clone();
            continue;
        }
        let v = mse(&params.residual(&theta, &xv, &yv).1);
        if v < best_val {
            best_val = v;
            best = theta.clone();
            fails = 0;
        } else {
            fails += 1;
            if fails >= cfg.max_fail {
                break;
            }
        }
    }

    if cfg.refit_output {
        let xa = normalized(&ds.x, &input_norm, Some(&train_all));
        let ya = DVector::from_iterator(train_all.len(), train_all.iter().map(|&i| output_norm.forward(0, ds.y[i])));
        if let Some(refit) = params.refit_output(&best, &xa, &ya) {
            let keep = val.is_empty() || mse(&params.residual(&refit, &xv, &yv).1) < mse(&params.residual(&best, &xv, &yv).1);
            if keep {
                best = refit;
            }
        }
    }

    let (w1, b1, w2, b2) = params.unpack(&best);
    let model = MlpModel {
        w1,
        b1,
        w2,
        b2,
        input_norm,
        output_norm,
        seed,
        spec: Some((ds.spec, ds.base_dt)),
    };
    if !finite_weights(&model) {
        return Err(Error::TrainingFailed("weights became non-finite".into()));
    }
    let train_mse = mse(&params.residual(&best, &xt, &yt).1);
    let validation_mse = if val.is_empty() { f64::NAN } else { mse(&params.residual(&best, &xv, &yv).1) };
    Ok((
        model,
        TrainReport { iterations, train_mse, validation_mse, train_rows: train.len(), validation_rows: val.len() },
    ))
}
