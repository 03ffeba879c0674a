use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// State left the finite range during integration.
    #[error("numerical blow-up at t = {t}: {what}")]
    NumericalBlowUp { t: f64, what: String },

    /// Closed-form expression evaluated outside its admissible region.
    #[error("formula singularity: {0}")]
    Singularity(String),

    /// Bisection bracket could not be established.
    #[error("bracket failure: {0}")]
    Bracket(String),

    #[error("loop failed to lock during warm-up")]
    NotLocked,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}
