//! Error type shared by all processing stages.

use thiserror::Error;

/// Errors produced by configuration validation, file I/O and the
/// processing stages.
#[derive(Debug, Error)]
pub enum RadarError {
    /// A configuration or argument violates a documented invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Scene beat frequencies exceed the sampled Nyquist rate.
    #[error("aliased scene: max beat frequency {max_beat_hz:.3e} Hz exceeds f_s/2 = {nyquist_hz:.3e} Hz")]
    AliasedScene { max_beat_hz: f64, nyquist_hz: f64 },

    /// Input vector/map too small for the requested sliding window.
    #[error("input too small: {0}")]
    InputTooSmall(String),

    /// Layout search exhausted its candidates without meeting the constraints.
    #[error("infeasible constraints: {0}")]
    InfeasibleConstraints(String),

    /// A numeric degeneracy (flat spectrum, empty cloud, nonpositive power, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed structured-text input; carries location diagnostics when known.
    #[error("parse error{}: {message}", location.as_ref().map(|l| format!(" at {l}")).unwrap_or_default())]
    Parse {
        message: String,
        location: Option<String>,
    },
}

impl RadarError {
    /// Stable machine-readable code, also used to derive CLI exit codes.
    pub fn code(&self) -> &'static str {
        match self {
            RadarError::InvalidConfig(_) => "InvalidConfig",
            RadarError::AliasedScene { .. } => "AliasedScene",
            RadarError::InputTooSmall(_) => "InputTooSmall",
            RadarError::InfeasibleConstraints(_) => "InfeasibleConstraints",
            RadarError::Degenerate(_) => "Degenerate",
            RadarError::Io(_) => "Io",
            RadarError::Parse { .. } => "Parse",
        }
    }

    /// Exit-code category: 2 validation, 3 I/O, 4 numeric/infeasible.
    pub fn exit_code(&self) -> i32 {
        match self {
            RadarError::InvalidConfig(_)
            | RadarError::AliasedScene { .. }
            | RadarError::InputTooSmall(_) => 2,
            RadarError::Io(_) | RadarError::Parse { .. } => 3,
            RadarError::InfeasibleConstraints(_) | RadarError::Degenerate(_) => 4,
        }
    }
}
