use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two agents came within the safe distance, where the potential is undefined.
    #[error("inter-agent distance {distance} is not above the safe distance {safe_distance}")]
    BelowSafeDistance { distance: f64, safe_distance: f64 },

    #[error("target position row of the transition matrix is not invertible at t = {t}")]
    SingularObservation { t: f64 },

    #[error("degenerate gains: k1*k2 == k4, fencing condition undefined")]
    DegenerateGains,

    #[error("zero pivot in row {row} of the Routh table")]
    DegenerateRouthTable { row: usize },

    #[error("closed-loop matrix is not Hurwitz")]
    NotHurwitz,

    #[error("linear system is singular")]
    SingularSystem,

    #[error("gain condition C2 violated: {0}")]
    C2Violated(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
