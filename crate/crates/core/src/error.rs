use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("boundary conditions do not match the model: {0}")]
    BoundaryMismatch(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    /// The shift lies above `count` eigenvalues of the pencil; retry lower.
    #[error("shift {shift} lies above {count} eigenvalue(s)")]
    ShiftAboveSpectrum { shift: f64, count: usize },

    #[error("bracket [{lo}, {hi}] does not straddle a minimum (minimizer at {at})")]
    BadBracket { lo: f64, hi: f64, at: f64 },

    #[error("weight 1 - h t kappa is not positive at sigma = {sigma}, tau = {tau}")]
    WeightNotPositive { sigma: f64, tau: f64 },

    #[error("invalid well profile: {0}")]
    InvalidWell(String),

    #[error("fit refused: {0}")]
    InsufficientRange(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
