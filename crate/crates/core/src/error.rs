//! Crate-wide error type.

use crate::vec2::Vec2;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The minimal-time collision is tangent to a curved wall or lands on a
    /// corner. These are measure-zero events; callers resample.
    #[error("tangent or corner collision (|v.n|/|v| = {grazing:.3e})")]
    Tangency { grazing: f64 },

    #[error("point ({0:?}) lies outside the domain")]
    OutsideDomain(Vec2),

    #[error("reflection requires an incoming velocity (v.n = {0:.3e} >= 0)")]
    NotIncoming(f64),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("time {t} outside [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A parameter left its mathematical domain (e.g. a non-positive Lyapunov
    /// exponent where the Lyapunov separation model is requested).
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("fit failed: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
