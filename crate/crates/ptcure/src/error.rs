use thiserror::Error;

/// Errors surfaced by parsing, validation, and the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("csv error at line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("dataset invalid ({count} violation(s)): {first}")]
    InvalidDataset { count: usize, first: String },

    #[error("linear predictor {value:.4e} exceeds the overflow guard ±{limit}")]
    LinearPredictorOverflow { value: f64, limit: f64 },

    #[error("cure threshold {tau} is below the largest uncensored time {max_uncensored}")]
    InvalidCureThreshold { tau: f64, max_uncensored: f64 },

    #[error("baseline estimation failed: {0}")]
    Baseline(String),

    #[error("multiplier equation has no admissible root: {0}")]
    NonBracketableRoot(String),

    #[error("singular matrix while computing {context}")]
    SingularMatrix { context: String },

    #[error("dispersion denominator is not positive (N={n}, parameters={params})")]
    DegenerateDispersion { n: usize, params: usize },

    #[error("no within-cluster pairs available for correlation estimation")]
    NoCorrelationPairs,

    #[error("binary correlation {eta} outside attainable range [{lo:.6}, {hi:.6}]")]
    EtaOutOfRange { eta: f64, lo: f64, hi: f64 },

    #[error("calibration target {target} unreachable inside the bracket")]
    CalibrationBracket { target: f64 },

    #[error("bootstrap aborted: {failed} of {total} replicates did not converge")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
