use thiserror::Error;

/// Errors raised by panel construction, estimation and inference.
///
/// Every variant has a stable short name (see [`Error::name`]) that the
/// command-line front end prints alongside the message.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("panel is empty")]
    EmptyPanel,
    #[error("unit `{unit}` has no value for period {period}")]
    UnbalancedPanel { unit: String, period: i64 },
    #[error("duplicate cell for unit `{unit}`, period {period}, variable `{variable}`")]
    DuplicateCell {
        unit: String,
        period: i64,
        variable: String,
    },
    #[error("non-numeric value `{value}` ({context})")]
    NonNumericValue { value: String, context: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("lag {lag} is not smaller than the number of periods {periods}")]
    LagTooLarge { lag: usize, periods: usize },
    #[error("differencing needs at least two periods")]
    SingletonTimeSeries,
    #[error("{periods} periods cannot support {lags} initial lags")]
    TooFewPeriods { periods: usize, lags: usize },
    #[error("time split needs at least 4 effective periods, got {0}")]
    TooFewPeriodsForSplit(usize),
    #[error("cross-section split needs at least 4 units, got {0}")]
    TooFewUnits(usize),
    #[error("invalid unit permutation: {0}")]
    InvalidPermutation(String),
    #[error("design matrix is rank deficient; offending columns: {}", .columns.join(", "))]
    RankDeficientDesign { columns: Vec<String> },
    #[error("cluster-robust covariance needs at least two clusters")]
    SingleCluster,
    #[error("bread matrix of the sandwich is singular")]
    SingularBread,
    #[error("bias-correction Hessian is singular")]
    SingularH,
    #[error("trimming parameter {trim} must satisfy 1 <= M < {periods}")]
    InvalidTrim { trim: usize, periods: usize },
    #[error("no valid instruments for the differenced equations")]
    NoValidInstruments,
    #[error("one-step weight matrix is identically zero")]
    ZeroWeightMatrix,
    #[error("order condition fails: {moments} moments for {params} parameters")]
    OrderConditionFailed { moments: usize, params: usize },
    #[error("GMM normal matrix is singular")]
    SingularGmmGram,
    #[error("half sample lost identification: {0}")]
    HalfSampleOrderConditionFailed(String),
    #[error("long-run denominator 1 - sum(beta) = {0:e} is numerically zero")]
    UnitRootDenominator(f64),
    #[error("delta-method variance is negative ({0:e})")]
    NegativeVariance(f64),
    #[error("{failed} of {total} bootstrap replicates failed")]
    TooManyFailedReplicates { failed: usize, total: usize },
    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("config line {line}: {reason}")]
    ConfigParse { line: usize, reason: String },
    #[error("{0}")]
    Io(String),
}

impl Error {
    /// Stable identifier of the error kind.
    pub fn name(&self) -> &'static str {
        match self {
            Error::EmptyPanel => "EmptyPanel",
            Error::UnbalancedPanel { .. } => "UnbalancedPanel",
            Error::DuplicateCell { .. } => "DuplicateCell",
            Error::NonNumericValue { .. } => "NonNumericValue",
            Error::UnknownVariable(_) => "UnknownVariable",
            Error::LagTooLarge { .. } => "LagTooLarge",
            Error::SingletonTimeSeries => "SingletonTimeSeries",
            Error::TooFewPeriods { .. } => "TooFewPeriods",
            Error::TooFewPeriodsForSplit(_) => "TooFewPeriodsForSplit",
            Error::TooFewUnits(_) => "TooFewUnits",
            Error::InvalidPermutation(_) => "InvalidPermutation",
            Error::RankDeficientDesign { .. } => "RankDeficientDesign",
            Error::SingleCluster => "SingleCluster",
            Error::SingularBread => "SingularBread",
            Error::SingularH => "SingularH",
            Error::InvalidTrim { .. } => "InvalidTrim",
            Error::NoValidInstruments => "NoValidInstruments",
            Error::ZeroWeightMatrix => "ZeroWeightMatrix",
            Error::OrderConditionFailed { .. } => "OrderConditionFailed",
            Error::SingularGmmGram => "SingularGMMGram",
            Error::HalfSampleOrderConditionFailed(_) => "HalfSampleOrderConditionFailed",
            Error::UnitRootDenominator(_) => "UnitRootDenominator",
            Error::NegativeVariance(_) => "NegativeVariance",
            Error::TooManyFailedReplicates { .. } => "TooManyFailedReplicates",
            Error::InvalidConfig { .. } => "InvalidConfig",
            Error::ConfigParse { .. } => "ConfigParse",
            Error::Io(_) => "Io",
        }
    }

    /// True for errors caused by malformed input data rather than by estimation.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyPanel
                | Error::UnbalancedPanel { .. }
                | Error::DuplicateCell { .. }
                | Error::NonNumericValue { .. }
                | Error::UnknownVariable(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
