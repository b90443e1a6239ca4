use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A waveform does not fit inside the time window.
    #[error("window overflow: {0}")]
    WindowOverflow(String),

    /// Energy reached the edge of the window and would wrap around.
    #[error("wrap-around after {stage}: boundary amplitude is {ratio:.3e} of peak (limit 1e-8)")]
    WrapAround { stage: String, ratio: f64 },

    /// Spectral content reached the Nyquist edge of the grid.
    #[error("aliasing after {stage}: spectral edge amplitude is {ratio:.3e} of peak (limit 1e-8)")]
    Aliasing { stage: String, ratio: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient support: {found} samples qualify, at least {required} required")]
    InsufficientSupport { found: usize, required: usize },

    #[error("degenerate magnification M = {0}")]
    DegenerateMagnification(f64),

    #[error("carrier mismatch: lens expects {expected} nm, envelope is at {found} nm")]
    CarrierMismatch { expected: f64, found: f64 },

    #[error("grid mismatch between signal and pump")]
    GridMismatch,

    #[error("topology invariant violated: {0}")]
    TopologyInvariant(String),

    #[error("peak detection failed: {0}")]
    PeakDetection(String),

    #[error("invalid design request: {0}")]
    InvalidRequest(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
