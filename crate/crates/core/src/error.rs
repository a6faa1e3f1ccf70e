use thiserror::Error;

/// Errors raised across design, density, and estimation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty comparison: both arms have zero responses")]
    EmptyComparison,
    #[error("degenerate stratum: fewer than two responses in the pooled stratum")]
    DegenerateStratum,
    #[error("stratified sum over an empty list")]
    EmptyStrata,
    #[error("infinite log-odds: probabilities must lie strictly inside (0, 1), got {0} and {1}")]
    InfiniteLogOdds(f64, f64),
    #[error("invalid hypergeometric parameters: population {population}, marked {marked}, sample {sample}")]
    HypergeometricBounds {
        population: u64,
        marked: u64,
        sample: u64,
    },
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("boundary offset {offset} outside [0, {width}]")]
    OffsetOutOfRange { offset: f64, width: f64 },
    #[error("inconsistent outcome: the terminal window has zero probability")]
    InconsistentOutcome,
    #[error("negative variance estimate ({0:.6})")]
    NegativeVariance(f64),
    #[error("search range exhausted: tail probability {target} not bracketed in [{lo}, {hi}]")]
    SearchRangeExhausted { target: f64, lo: f64, hi: f64 },
    #[error("no consistent histories among {replicates} reverse simulations")]
    NoConsistentHistories { replicates: u64 },
    #[error("invalid record: {0}")]
    Record(String),
    #[error("invalid design: {0}")]
    Design(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("method `{method}` does not support {what}")]
    Unsupported { method: String, what: String },
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("zero information: {0}")]
    ZeroInformation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NegativeVariance(_)
                | Error::SearchRangeExhausted { .. }
                | Error::NoConsistentHistories { .. }
                | Error::InconsistentOutcome
                | Error::ZeroInformation(_)
        )
    }
}
