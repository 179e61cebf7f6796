use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("design matrix is rank deficient")]
    SingularDesign,

    #[error("separation detected: |linear predictor| exceeded {0} before convergence")]
    Separation(f64),

    #[error("logistic fit did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("degenerate sample: no spread in the data")]
    DegenerateSample,

    #[error("degenerate test statistic: estimated variance is not positive")]
    DegenerateStatistic,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no root of {what} in bracket [{lo}, {hi}]")]
    NoRoot { what: &'static str, lo: f64, hi: f64 },

    #[error("row {row}: {msg}")]
    CsvRow { row: usize, msg: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
