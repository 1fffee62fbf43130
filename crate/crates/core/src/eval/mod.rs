//! Metrics, ideal-inverse references and the sweep experiments.

pub mod decay;
pub mod ideal;
pub mod metrics;
pub mod report;
pub mod sweep;

pub use decay::{fit_exponential, hidden_state_decay, DecayExperiment, DecayPoint, ExpFit};
pub use ideal::{evaluation_record, ideal_inverse, ideal_inverse_suite};
pub use metrics::{argmin_width, normalized_error, MetricReport, WidthErrors};
pub use report::{decay_experiment_csv, decay_fit_csv, table2_csv, table3_csv};
pub use sweep::{
    derive_seed, evaluate_model, predict_record, regime_record, run_jobs, sweep_derivatives, sweep_history, train_pool,
    DerivativeRow, DerivativeSweep, DerivativeSweepConfig, ExperimentData, HistoryCell, HistorySweepConfig, Regime,
    SweepResult, DEFAULT_HIDDEN, DEFAULT_TAP_DTS, DEFAULT_WINDOWS, FLOOR_PCT,
};
