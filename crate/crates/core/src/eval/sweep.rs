//! History-length and derivative-order sweeps over the learned operators.

use serde::{Deserialize, Serialize};

use super::decay::{fit_exponential, ExpFit};
use super::ideal::evaluation_record;
use super::metrics::{normalized_error, MetricReport, WidthErrors};
use crate::collect::{collect_record, with_output_noise};
use crate::error::{Error, Result};
use crate::learner::{build_dataset, build_dataset_from_rest, train_mlp, FeatureSpec, MlpModel, ModelPool, PoolEntry, TrainConfig};
use crate::lti::{build_example_system, normal_form, NormalForm, StateSpace, DEFAULT_TOL};
use crate::signals::{evaluation_suite, ExcitationSpec, Snr, DEFAULT_CUTOFF};
use crate::trajectory::Trajectory;

/// Hidden widths tried for every operator.
pub const DEFAULT_HIDDEN: [usize; 5] = [5, 10, 20, 40, 80];
pub const DEFAULT_WINDOWS: [f64; 6] = [0.1, 0.2, 0.4, 0.8, 1.6, 3.2];
pub const DEFAULT_TAP_DTS: [f64; 3] = [0.05, 0.1, 0.2];
/// Errors below this (percent) are treated as the training floor and left out of the decay fit.
pub const FLOOR_PCT: f64 = 0.005;

/// Mixes a master seed with a path of integers (SplitMix64 finalizer per step).
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(master), |acc, p| mix(acc ^ mix(*p)))
}

/// Plant, training record and evaluation references shared by the sweeps.
#[derive(Clone, Debug)]
pub struct ExperimentData {
    pub system: StateSpace,
    pub normal_form: NormalForm,
    /// Clean training record, channels `u, y, dy, ddy, d3y, d4y`.
    pub record: Trajectory,
    /// Evaluation records from rest, same channels with `u` the ideal inverse.
    pub evaluation: Vec<Trajectory>,
}

impl ExperimentData {
    pub fn new(system: StateSpace, excitation: &ExcitationSpec, base_dt: f64, cutoff: f64) -> Result<Self> {
        let normal_form = normal_form(&system, DEFAULT_TOL)?;
        let record = collect_record(&system, excitation, base_dt, excitation.duration())?;
        let evaluation = evaluation_suite(base_dt, cutoff)?
            .iter()
            .map(|f| evaluation_record(&normal_form, f))
            .collect::<Result<_>>()?;
        Ok(Self { system, normal_form, record, evaluation })
    }

    /// The two-mass example with the default excitation.
    pub fn example(base_dt: f64) -> Result<Self> {
        Self::new(build_example_system(), &ExcitationSpec::default(), base_dt, DEFAULT_CUTOFF)
    }

    pub fn base_dt(&self) -> f64 {
        self.record.dt()
    }
}

/// Training-data regime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    NoiseFree,
    Noisy,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::NoiseFree => "noise-free",
            Regime::Noisy => "noisy",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "noise-free" | "clean" => Ok(Regime::NoiseFree),
            "noisy" => Ok(Regime::Noisy),
            other => Err(Error::Parse(format!("unknown regime '{other}' (expected noise-free or noisy)"))),
        }
    }
}

/// Training record for a regime; noise goes on the output channels only.
pub fn regime_record(data: &ExperimentData, regime: Regime, snr: Snr, master_seed: u64) -> Result<Trajectory> {
    match regime {
        Regime::NoiseFree => Ok(data.record.clone()),
        Regime::Noisy => with_output_noise(&data.record, snr.as_db(), derive_seed(master_seed, &[NOISE_TAG])),
    }
}

const NOISE_TAG: u64 = 0x6e6f_6973;
const HISTORY_TAG: u64 = 0x7461_6232;
const DERIVATIVE_TAG: u64 = 0x7461_6233;

/// Normalized error of a model on every evaluation record, in percent.
pub fn evaluate_model(model: &MlpModel, spec: &FeatureSpec, evaluation: &[Trajectory]) -> Result<Vec<f64>> {
    evaluation
        .iter()
        .map(|rec| {
            let ds = build_dataset_from_rest(rec, spec)?;
            let pred = model.predict_batch(&ds.x)?;
            normalized_error(pred.as_slice(), ds.y.as_slice())
        })
        .collect()
}

/// Prediction of a model along one evaluation record, channel `u_hat`.
pub fn predict_record(model: &MlpModel, spec: &FeatureSpec, record: &Trajectory) -> Result<Trajectory> {
    let ds = build_dataset_from_rest(record, spec)?;
    let pred = model.predict_batch(&ds.x)?;
    Trajectory::from_channel(record.dt(), record.t0(), "u_hat", pred.as_slice())
}

/// Runs `jobs` in order on up to `threads` workers; results keep job order.
pub fn run_jobs<T, F>(count: usize, threads: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if threads <= 1 {
        return (0..count).map(job).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&job).collect()),
        Err(_) => (0..count).map(job).collect(),
    }
}

/// Trains one model per width on `record` and scores each on the evaluation suite.
pub fn train_pool(
    record: &Trajectory,
    evaluation: &[Trajectory],
    spec: &FeatureSpec,
    hidden: &[usize],
    seeds: &[u64],
    train: &TrainConfig,
    threads: usize,
) -> Result<ModelPool> {
    let ds = build_dataset(record, spec)?;
    let outcomes = run_jobs(hidden.len(), threads, |i| -> Result<PoolEntry> {
        let (model, _) = train_mlp(&ds, hidden[i], seeds[i], train)?;
        let errors = WidthErrors::new(hidden[i], evaluate_model(&model, spec, evaluation)?);
        Ok(PoolEntry { hidden: hidden[i], model, errors })
    });
    Ok(ModelPool { entries: outcomes.into_iter().collect::<Result<_>>()? })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistorySweepConfig {
    pub windows: Vec<f64>,
    pub tap_dts: Vec<f64>,
    pub hidden: Vec<usize>,
    /// Derivative order of the features.
    pub order: usize,
    pub train: TrainConfig,
    pub floor_pct: f64,
}

impl Default for HistorySweepConfig {
    fn default() -> Self {
        Self {
            windows: DEFAULT_WINDOWS.to_vec(),
            tap_dts: DEFAULT_TAP_DTS.to_vec(),
            hidden: DEFAULT_HIDDEN.to_vec(),
            order: 2,
            train: TrainConfig::default(),
            floor_pct: FLOOR_PCT,
        }
    }
}

/// One `(T, tap spacing)` cell of the history sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryCell {
    pub window: f64,
    pub tap_dt: f64,
    pub outcome: std::result::Result<MetricReport, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayFitRow {
    pub tap_dt: f64,
    pub fit: std::result::Result<ExpFit, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<HistoryCell>,
    pub fits: Vec<DecayFitRow>,
    pub master_seed: u64,
    pub floor_pct: f64,
}

impl SweepResult {
    pub fn cell(&self, window: f64, tap_dt: f64) -> Option<&HistoryCell> {
        self.cells.iter().find(|c| close(c.window, window) && close(c.tap_dt, tap_dt))
    }

    pub fn completed(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_ok()).count()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn seeds_for(master: u64, tag: u64, cell: &[u64], hidden: &[usize]) -> Vec<u64> {
    hidden
        .iter()
        .map(|&n| {
            let mut path = vec![tag];
            path.extend_from_slice(cell);
            path.push(n as u64);
            derive_seed(master, &path)
        })
        .collect()
}

/// Fits `e_u(T) = beta exp(-alpha T)` on the cells above the floor.
pub fn fit_history(cells: &[HistoryCell], tap_dt: f64, floor_pct: f64) -> std::result::Result<ExpFit, String> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = cells
        .iter()
        .filter(|c| close(c.tap_dt, tap_dt))
        .filter_map(|c| c.outcome.as_ref().ok().map(|r| (c.window, r.e_u)))
        .filter(|(_, e)| *e >= floor_pct)
        .unzip();
    fit_exponential(&xs, &ys).map_err(|e| e.to_string())
}

/// Trains and scores the pool for every window and tap spacing.
pub fn sweep_history(data: &ExperimentData, cfg: &HistorySweepConfig, master_seed: u64, threads: usize) -> Result<SweepResult> {
    if cfg.hidden.is_empty() || cfg.windows.is_empty() || cfg.tap_dts.is_empty() {
        return Err(Error::Domain("history sweep needs windows, tap spacings and hidden widths".into()));
    }
    let mut cells = Vec::new();
    for &tap_dt in &cfg.tap_dts {
        for &window in &cfg.windows {
            let spec = FeatureSpec::history_derivatives(window, tap_dt, cfg.order);
            let seeds = seeds_for(master_seed, HISTORY_TAG, &[window.to_bits(), tap_dt.to_bits()], &cfg.hidden);
            let outcome = spec
                .layout(data.base_dt())
                .and_then(|_| train_pool(&data.record, &data.evaluation, &spec, &cfg.hidden, &seeds, &cfg.train, threads))
                .and_then(|pool| pool.report())
                .map_err(|e| e.to_string());
            cells.push(HistoryCell { window, tap_dt, outcome });
        }
    }
    let fits = cfg
        .tap_dts
        .iter()
        .map(|&tap_dt| DecayFitRow { tap_dt, fit: fit_history(&cells, tap_dt, cfg.floor_pct) })
        .collect();
    Ok(SweepResult { cells, fits, master_seed, floor_pct: cfg.floor_pct })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DerivativeSweepConfig {
    pub window: f64,
    pub tap_dt: f64,
    /// Derivative orders for the history-derivative operators.
    pub orders: Vec<usize>,
    /// Also train the input-output history variants.
    pub narx: bool,
    pub regimes: Vec<Regime>,
    pub snr: Snr,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    /// Training settings for the noisy regime.
    pub noisy_train: TrainConfig,
}

impl Default for DerivativeSweepConfig {
    fn default() -> Self {
        Self {
            window: 3.2,
            tap_dt: 0.05,
            orders: (0..=4).collect(),
            narx: true,
            regimes: vec![Regime::NoiseFree, Regime::Noisy],
            snr: Snr::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
            train: TrainConfig::default(),
            noisy_train: TrainConfig::noisy(),
        }
    }
}

impl DerivativeSweepConfig {
    pub fn train_config(&self, regime: Regime) -> &TrainConfig {
        match regime {
            Regime::NoiseFree => &self.train,
            Regime::Noisy => &self.noisy_train,
        }
    }

    pub fn operators(&self) -> Vec<FeatureSpec> {
        let mut specs: Vec<FeatureSpec> =
            self.orders.iter().map(|&l| FeatureSpec::history_derivatives(self.window, self.tap_dt, l)).collect();
        if self.narx {
            specs.push(FeatureSpec::narx(self.window, self.tap_dt));
            specs.push(FeatureSpec::narx_star(self.window, self.tap_dt));
        }
        specs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeRow {
    pub operator: String,
    pub spec: FeatureSpec,
    pub regime: Regime,
    pub outcome: std::result::Result<MetricReport, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeSweep {
    pub rows: Vec<DerivativeRow>,
    pub master_seed: u64,
    pub snr: Snr,
}

impl DerivativeSweep {
    pub fn row(&self, operator: &str, regime: Regime) -> Option<&DerivativeRow> {
        self.rows.iter().find(|r| r.operator == operator && r.regime == regime)
    }
}

/// Trains and scores the pool for every operator variant and regime.
pub fn sweep_derivatives(data: &ExperimentData, cfg: &DerivativeSweepConfig, master_seed: u64, threads: usize) -> Result<DerivativeSweep> {
    if cfg.hidden.is_empty() {
        return Err(Error::Domain("derivative sweep needs hidden widths".into()));
    }
    let mut rows = Vec::new();
    for &regime in &cfg.regimes {
        let record = regime_record(data, regime, cfg.snr, master_seed)?;
        for spec in cfg.operators() {
            let cell = [regime as u64, spec.mode as u64, spec.order as u64];
            let seeds = seeds_for(master_seed, DERIVATIVE_TAG, &cell, &cfg.hidden);
            let outcome = train_pool(&record, &data.evaluation, &spec, &cfg.hidden, &seeds, cfg.train_config(regime), threads)
                .and_then(|pool| pool.report())
                .map_err(|e| e.to_string());
            rows.push(DerivativeRow { operator: spec.operator_label(), spec, regime, outcome });
        }
    }
    Ok(DerivativeSweep { rows, master_seed, snr: cfg.snr })
}
