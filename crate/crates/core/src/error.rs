use std::path::PathBuf;

use thiserror::Error;

use crate::units::UnitError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("syntax error in configuration: {0}")]
    Syntax(String),

    #[error("unknown configuration key {0}")]
    UnknownKey(String),

    #[error("invalid value for {key}: {reason}")]
    Invalid { key: String, reason: String },

    #[error("invalid value for {key}: {source}")]
    Unit {
        key: String,
        #[source]
        source: UnitError,
    },

    #[error("precession frequency {omega:.4e} rad/s at n = {n} is below the guard; shrink n_window")]
    NonpositiveFrequency { n: f64, omega: f64 },

    #[error("pulse propagator failed to converge: unitarity defect {defect:.3e} after {steps} steps")]
    NonUnitary { defect: f64, steps: usize },

    #[error("pulse does not couple either electron state to a trion")]
    NoExcitation,

    #[error("period map is not contractive (spectral radius {radius}); no unique steady state")]
    NonContractive { radius: f64 },

    #[error("table lengths do not match the polarization grid: {0}")]
    MisalignedTables(String),

    #[error("flip rate at grid index {index} is not positive")]
    ZeroRate { index: usize },

    #[error("time step {dt:.3e} s is unstable; maximum admissible step is {max_dt:.3e} s")]
    UnstableStep { dt: f64, max_dt: f64 },

    #[error("precessing-spin weights vanish; frequency is undefined")]
    DegenerateWeights,

    #[error("output error for {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl Error {
    /// Short stable tag for machine consumption on stderr.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Syntax(_) => "syntax",
            Error::UnknownKey(_) => "unknown-key",
            Error::Invalid { .. } | Error::Unit { .. } => "invalid",
            Error::NonpositiveFrequency { .. } => "nonpositive-frequency",
            Error::NonUnitary { .. } => "non-unitary",
            Error::NoExcitation => "no-excitation",
            Error::NonContractive { .. } => "non-contractive",
            Error::MisalignedTables(_) => "misaligned-tables",
            Error::ZeroRate { .. } => "zero-rate",
            Error::UnstableStep { .. } => "unstable-step",
            Error::DegenerateWeights => "degenerate-weights",
            Error::Output { .. } => "output",
        }
    }

    /// Whether the error stems from user input rather than the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Syntax(_)
                | Error::UnknownKey(_)
                | Error::Invalid { .. }
                | Error::Unit { .. }
                | Error::Output { .. }
        )
    }

    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
