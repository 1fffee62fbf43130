//! Data-enabled inverse operators for stable minimum-phase LTI SISO systems.
//!
//! The crate covers the normal-form decomposition and exact inverse
//! ([`lti`], [`inverse`]), excitation and evaluation signals ([`signals`],
//! [`collect`]), the learned operator ([`learner`]) and the experiment
//! harness ([`eval`]).

pub mod collect;
pub mod error;
pub mod eval;
pub mod inverse;
pub mod learner;
pub mod lti;
pub mod ode;
pub mod poly;
pub mod signals;
pub mod trajectory;

pub use error::{Error, Result};
pub use eval::{
    DecayExperiment, DerivativeSweep, DerivativeSweepConfig, ExperimentData, HistorySweepConfig, MetricReport, Regime,
    SweepResult, WidthErrors,
};
pub use inverse::{DecayBound, HiddenStateEstimate, WindowKernel};
pub use learner::{Dataset, FeatureMode, FeatureSpec, MlpModel, ModelPool, TrainConfig, TrainReport};
pub use lti::{NormalForm, StateSpace, StateSpaceFile, TransferFunction};
pub use signals::{ExcitationSpec, FilteredTrajectory, Snr};
pub use trajectory::{Signal, Trajectory};
