//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid topology, plan, or parameter values.
    #[error("configuration error: {0}")]
    Config(String),

    /// Explicit integrator step exceeds the stability bound.
    #[error("time step {dt} s exceeds stability bound {bound} s")]
    UnstableStep { dt: f64, bound: f64 },

    /// A die temperature reached the maximum junction temperature.
    #[error("thermal trip: core {core} reached {temp} °C (tj_max {tj_max} °C) at t = {time} s")]
    ThermalTrip {
        core: usize,
        temp: f64,
        tj_max: f64,
        time: f64,
    },

    /// Trace ended before the requested number of bits could be decoded.
    #[error("trace too short: decoded {recovered} of {requested} bits")]
    TruncatedTrace { recovered: usize, requested: usize },

    /// Bit sequences of different lengths were compared.
    #[error("length mismatch: {left} vs {right} bits")]
    LengthMismatch { left: usize, right: usize },

    /// Pearson correlation of a zero-variance trace is undefined.
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    /// Traces are not on the same sampling grid.
    #[error("sampling grid mismatch: {0}")]
    GridMismatch(String),

    /// Model fit did not reach the requested tolerance.
    #[error("fit did not converge: {0}")]
    FitFailed(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    ConfigParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
