//! Run configuration: a flat TOML file, every key optional.
//!
//! ```toml
//! system = "example"          # or a path to a TOML file with `a`, `b`, `c`
//! base_rate = 100.0           # Hz
//! windows = [0.1, 0.2, 0.4, 0.8, 1.6, 3.2]
//! tap_dts = [0.05, 0.1, 0.2]
//! hidden = [5, 10, 20, 40, 80]
//! orders = [0, 1, 2, 3, 4]
//! narx = true
//! regimes = ["noise-free", "noisy"]
//! snr_db = 20.0
//! cutoff = 6.283185307179586  # rad/s, evaluation filter chain
//! seed = 1
//! out = "out"
//! jobs = 1
//!
//! [train]                     # noise-free training settings
//! max_iters = 40
//!
//! [noisy_train]               # noisy-regime training settings
//! weight_decay = 1.0
//! ```

use std::path::{Path, PathBuf};

use koopinv::eval::{DEFAULT_HIDDEN, DEFAULT_TAP_DTS, DEFAULT_WINDOWS};
use koopinv::learner::FeatureSpec;
use koopinv::lti::{build_example_system, StateSpaceFile};
use koopinv::signals::{ExcitationSpec, Snr, DEFAULT_CUTOFF};
use koopinv::{DerivativeSweepConfig, HistorySweepConfig, Regime, StateSpace, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "KOOPINV_SEED";
pub const OUT_ENV: &str = "KOOPINV_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: String,
    pub base_rate: f64,
    pub windows: Vec<f64>,
    pub tap_dts: Vec<f64>,
    pub hidden: Vec<usize>,
    pub orders: Vec<usize>,
    pub narx: bool,
    pub regimes: Vec<Regime>,
    pub snr_db: f64,
    pub cutoff: f64,
    /// Path to an excitation table of `f, alpha` lines; the built-in table when empty.
    pub excitation: String,
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
    pub train: TrainConfig,
    pub noisy_train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: "example".into(),
            base_rate: 100.0,
            windows: DEFAULT_WINDOWS.to_vec(),
            tap_dts: DEFAULT_TAP_DTS.to_vec(),
            hidden: DEFAULT_HIDDEN.to_vec(),
            orders: (0..=4).collect(),
            narx: true,
            regimes: vec![Regime::NoiseFree, Regime::Noisy],
            snr_db: 20.0,
            cutoff: DEFAULT_CUTOFF,
            excitation: String::new(),
            seed: 1,
            out: PathBuf::from("out"),
            jobs: 1,
            train: TrainConfig::default(),
            noisy_train: TrainConfig::noisy(),
        }
    }
}

impl RunConfig {
    /// Reads a config file, or the defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))?;
        if !cfg.system.is_empty() && cfg.system != "example" {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.system = base.join(&cfg.system).to_string_lossy().into_owned();
        }
        if !cfg.excitation.is_empty() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.excitation = base.join(&cfg.excitation).to_string_lossy().into_owned();
        }
        Ok(cfg)
    }

    /// Applies environment overrides for the seed and the output directory.
    pub fn apply_env(&mut self, seed: Option<String>, out: Option<String>) -> Result<(), CliError> {
        if let Some(s) = seed {
            self.seed = s.trim().parse().map_err(|_| CliError::Input(format!("{SEED_ENV}={s} is not an integer")))?;
        }
        if let Some(o) = out {
            self.out = PathBuf::from(o);
        }
        Ok(())
    }

    pub fn base_dt(&self) -> f64 {
        1.0 / self.base_rate
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.base_rate > 0.0 && self.base_rate.is_finite()) {
            return Err(CliError::Input(format!("base_rate must be positive, got {}", self.base_rate)));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(CliError::Input("hidden must list positive widths".into()));
        }
        if !(self.snr_db.is_finite()) {
            return Err(CliError::Input("snr_db must be finite".into()));
        }
        if !(self.cutoff > 0.0) {
            return Err(CliError::Input("cutoff must be positive".into()));
        }
        if self.jobs == 0 {
            return Err(CliError::Input("jobs must be at least 1".into()));
        }
        // window/tap combinations that do not divide are reported per sweep cell
        for &dt in &self.tap_dts {
            self.check_spec(&FeatureSpec::history_derivatives(dt, dt, 0))?;
        }
        for &t in &self.windows {
            self.check_spec(&FeatureSpec::history_derivatives(t, self.base_dt(), 0))?;
        }
        self.train.validate().map_err(|e| CliError::Input(format!("[train] {e}")))?;
        self.noisy_train.validate().map_err(|e| CliError::Input(format!("[noisy_train] {e}")))?;
        Ok(())
    }

    /// Rejects tap spacings that are not multiples of the base period and
    /// windows that are not multiples of the tap spacing.
    pub fn check_spec(&self, spec: &FeatureSpec) -> Result<(), CliError> {
        spec.layout(self.base_dt()).map(|_| ()).map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn system(&self) -> Result<StateSpace, CliError> {
        if self.system.is_empty() || self.system == "example" {
            return Ok(build_example_system());
        }
        let text = std::fs::read_to_string(&self.system)
            .map_err(|e| CliError::Input(format!("cannot read system file {}: {e}", self.system)))?;
        let file: StateSpaceFile =
            toml::from_str(&text).map_err(|e| CliError::Input(format!("invalid system file {}: {e}", self.system)))?;
        file.build().map_err(|e| CliError::Input(format!("invalid system file {}: {e}", self.system)))
    }

    pub fn excitation(&self) -> Result<ExcitationSpec, CliError> {
        if self.excitation.is_empty() {
            return Ok(ExcitationSpec::default());
        }
        let text = std::fs::read_to_string(&self.excitation)
            .map_err(|e| CliError::Input(format!("cannot read excitation table {}: {e}", self.excitation)))?;
        ExcitationSpec::parse_pairs(&text).map_err(|e| CliError::Input(format!("{}: {e}", self.excitation)))
    }

    pub fn snr(&self) -> Snr {
        Snr::Db(self.snr_db)
    }

    pub fn train_config(&self, regime: Regime) -> &TrainConfig {
        match regime {
            Regime::NoiseFree => &self.train,
            Regime::Noisy => &self.noisy_train,
        }
    }

    pub fn history_sweep(&self, tap_dts: Option<Vec<f64>>) -> HistorySweepConfig {
        HistorySweepConfig {
            windows: self.windows.clone(),
            tap_dts: tap_dts.unwrap_or_else(|| self.tap_dts.clone()),
            hidden: self.hidden.clone(),
            train: self.train.clone(),
            ..HistorySweepConfig::default()
        }
    }

    pub fn derivative_sweep(&self, window: f64, tap_dt: f64, regimes: Option<Vec<Regime>>) -> DerivativeSweepConfig {
        DerivativeSweepConfig {
            window,
            tap_dt,
            orders: self.orders.clone(),
            narx: self.narx,
            regimes: regimes.unwrap_or_else(|| self.regimes.clone()),
            snr: self.snr(),
            hidden: self.hidden.clone(),
            train: self.train.clone(),
            noisy_train: self.noisy_train.clone(),
        }
    }
}
