use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("iteration count must be at least 1")]
    ZeroIterations,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("strip centered at {center} with width {width} contains no grid cells")]
    EmptyStrip { center: f64, width: f64 },

    #[error("field has no unmasked cells")]
    AllMasked,

    #[error("no exponential regime found: {0}")]
    NoExponentialRegime(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "Schur iteration did not converge at row {row} after {iterations} iterations \
         (dimension {dim}, max |entry| {max_abs:e}, non-finite entries: {non_finite})"
    )]
    SchurNoConvergence {
        row: usize,
        iterations: usize,
        dim: usize,
        max_abs: f64,
        non_finite: bool,
    },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("distribution is identically zero")]
    DegenerateField,

    #[error("requested {requested} states but only {available} have nonzero dwell time")]
    NotEnoughStates { requested: usize, available: usize },

    #[error("malformed LCF1 data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
