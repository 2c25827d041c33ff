use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point outside the validity domain of {family}: {reason}")]
    OutsideDomain { family: &'static str, reason: String },

    #[error("profile trajectory covers y in [0, {y_last}], requested y = {y}")]
    ProfileCoverage { y: f64, y_last: f64 },

    #[error("insufficient range: {0}")]
    InsufficientRange(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("shooting failed: {0}")]
    Shooting(String),

    #[error("corner incompatibility at x = {x}: initial {initial} vs boundary {boundary}")]
    CornerIncompatibility { x: f64, initial: f64, boundary: f64 },

    #[error("numerical instability detected at t = {t}: {reason}")]
    Instability { t: f64, reason: String },

    #[error("{0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
