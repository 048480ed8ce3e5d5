use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("plant matrix A is singular (condition number {cond:.3e})")]
    SingularPlant { cond: f64 },

    #[error("controller is not a washout controller: I - L is singular (condition number {cond:.3e})")]
    NonWashout { cond: f64 },

    #[error("certificate W(tau) is singular at tau = {tau} (condition number {cond:.3e})")]
    CertificateSingular { tau: f64, cond: f64 },

    #[error("gain recovery is ill-conditioned: cond(S11) = {cond:.3e}")]
    RecoveryIllConditioned { cond: f64 },

    #[error("no feasible T2 in the search bracket (infeasible at T2 = {lo})")]
    NoFeasibleT2 { lo: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
