use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("degenerate system: CA^(i-1)B vanishes for every i <= n")]
    DegenerateSystem,
    #[error("ill-conditioned realization: {0}")]
    IllConditioned(String),
    #[error("spectral failure: eigenvalue iteration did not converge")]
    SpectralFailure,
    #[error("transform construction failed: {0}")]
    TransformConstruction(String),
    #[error("normal form mismatch: {0}")]
    NormalFormMismatch(String),
    #[error("simulation diverged at t = {t}")]
    SimulationDiverged { t: f64 },
    #[error("identification inconclusive: no derivative jump up to order {max_order}")]
    IdentificationInconclusive { max_order: usize },
    #[error("operator unstable: zero dynamics are not Hurwitz")]
    OperatorUnstable,
    #[error("no exponential bound: A4 is not Hurwitz")]
    NoExponentialBound,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("SNR undefined for a zero-power signal (channel {0})")]
    SnrUndefined(String),
    #[error("normalization undefined: reference signal is identically zero")]
    NormalizationUndefined,
    #[error("no valid samples for dataset: {0}")]
    EmptyDataset(String),
    #[error("training failed: {0}")]
    TrainingFailed(String),
    #[error("feature width mismatch: model expects {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("incompatible feature spec: {0}")]
    IncompatibleSpec(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
