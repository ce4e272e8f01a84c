//! Crate-wide error type.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A historic sample of length >= 2 is required to estimate variances.
    #[error("insufficient historic data (need at least {needed} observations, got {got})")]
    InsufficientHistoricData { needed: usize, got: usize },

    #[error("empty reference sample")]
    EmptyReferenceSample,

    /// The weight function rho is only defined on (0, inf).
    #[error("weight undefined at nonpositive time (t = {t})")]
    WeightUndefinedAtNonpositiveTime { t: f64 },

    #[error("nonpositive scale (sigma1 = {sigma1}, sigma2 = {sigma2})")]
    NonpositiveScale { sigma1: f64, sigma2: f64 },

    /// Streams must consist of finite values; NaN or infinity indicates a
    /// broken feed rather than a statistical event.
    #[error("non-finite observation at monitoring step {step}")]
    NonFiniteObservation { step: usize },

    /// The symmetric-sum kernel measures departures from a zero-mean
    /// symmetric distribution, so its change magnitude is the post-change
    /// mean itself rather than a function of a location shift.
    #[error("magnitude requires post-change mean for symmetric-sum kernel")]
    MagnitudeRequiresPostChangeMean,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Guard against accidentally enormous Monte-Carlo budgets.
    #[error(
        "simulation budget too large ({grid_points} grid points x {replications} replications); \
         lower the replication count or the grid resolution"
    )]
    BudgetExceeded {
        grid_points: usize,
        replications: usize,
    },

    #[error(
        "no critical values available for {key}; run the `critvals` subcommand \
         (or simulate_limit) to generate them"
    )]
    MissingCriticalValues { key: String },

    #[error("cache file {path}: {reason}")]
    CacheParse { path: String, reason: String },

    #[error("config file line {line}: {reason}")]
    ConfigParse { line: usize, reason: String },

    #[error("csv {path}: {reason}")]
    CsvData { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
