use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // Input files
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("no parseable rows in {0}")]
    NoRows(String),
    #[error("DuplicateDate: {0} appears more than once")]
    DuplicateDate(String),
    #[error("EmptyTable: price table has no rows")]
    EmptyTable,
    #[error("EmptyIntersection: the inputs share no dates")]
    EmptyIntersection,

    // Sentiment
    #[error("TooFewScores: need at least 4 scores, got {0}")]
    TooFewScores(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    // Causal discovery
    #[error("InvalidLag: lag must be at least 1")]
    InvalidLag,
    #[error("InsufficientSamples: {needed} samples needed, {got} available")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("SingularRegressors: regressor matrix is rank deficient")]
    SingularRegressors,
    #[error("RankDeficient: residual covariance is not full rank")]
    RankDeficient,
    #[error("NoConvergence: {0} did not converge within {1} iterations")]
    NoConvergence(&'static str, usize),
    #[error("DegenerateUnmixing: unmixing matrix has a zero diagonal under every row assignment")]
    DegenerateUnmixing,
    #[error("UnknownVariable: {0}")]
    UnknownVariable(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    // Change points
    #[error("EmptyRange: [{0}, {1}) is not a valid segment")]
    EmptyRange(usize, usize),
    #[error("InfeasibleBreakpoints: cannot place {requested} breakpoints in {samples} samples with min_size {min_size}")]
    InfeasibleBreakpoints {
        requested: usize,
        samples: usize,
        min_size: usize,
    },
    #[error("RegimeTooShort: regime of length {0} (need at least 2)")]
    RegimeTooShort(usize),
    #[error("signal needs at least 2 finite samples")]
    InvalidSignal,

    // Optimization
    #[error("InvalidAlpha: alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("Infeasible: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("invalid returns matrix: {0}")]
    InvalidReturns(String),

    // Backtest
    #[error("EmptyCalendar: no trading dates")]
    EmptyCalendar,
    #[error("InsufficientHistory: lookback of {lookback} days needs more than {available} price rows")]
    InsufficientHistory { lookback: usize, available: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by the caller's inputs or configuration rather
    /// than by a failure inside the pipeline.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::SolverFailure(_) | Error::NoConvergence(..) | Error::Io(_)
        )
    }
}
