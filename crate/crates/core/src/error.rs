use thiserror::Error;

/// Errors raised by fitting, estimation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no samples")]
    NoSamples,

    #[error("no events: at least one observed event is required to fit {0}")]
    NoEvents(&'static str),

    #[error("covariate length mismatch: expected {expected}, found {found}")]
    CovariateLength { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Cox fit did not converge after {iterations} iterations (score norm {score_norm:.3e}, beta {beta:?})")]
    NonConvergence {
        iterations: usize,
        score_norm: f64,
        beta: Vec<f64>,
    },

    #[error("information not invertible")]
    SingularInformation,

    #[error("copula parameter {theta} outside the {family} domain")]
    ParameterDomain { family: &'static str, theta: f64 },

    #[error("{family} copula does not support dimension {dim}")]
    UnsupportedDimension { family: &'static str, dim: usize },

    #[error("degenerate copula fit: pseudo-information {information:.3e}")]
    DegenerateFit { information: f64 },

    #[error("positivity violated for pair ({treated}, {control}) at component {component}: denominator {value:.3e}")]
    Positivity {
        treated: String,
        control: String,
        component: usize,
        value: f64,
    },

    #[error("empty arm {0}")]
    EmptyArm(u8),

    #[error("win ratio undefined: loss probability {0} is not positive")]
    WinRatioUndefined(f64),

    #[error("win odds undefined: |net benefit| = {0} is not below 1")]
    WinOddsUndefined(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("root bracket failure on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
