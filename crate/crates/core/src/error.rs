use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RsvdError {
    #[error("invalid alpha {0}: must be finite and within [0, 8]")]
    InvalidAlpha(f64),

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("input contains a non-finite entry at ({row}, {col})")]
    NonFiniteInput { row: usize, col: usize },

    #[error("matrix is too small: {rows}x{cols} (both dimensions must be at least 2)")]
    TooSmall { rows: usize, cols: usize },

    #[error("all weights collapsed along {axis} {index}; alpha is too large for the data scale")]
    DegenerateWeights { axis: Axis, index: usize },

    #[error("rank {rank} out of range 1..={max}")]
    RankTooLarge { rank: usize, max: usize },

    #[error("layer {layer}: {source}")]
    Layer {
        layer: usize,
        #[source]
        source: Box<RsvdError>,
    },

    #[error("invalid solver options: {0}")]
    InvalidOptions(String),

    #[error("vector is not unit norm (norm = {0})")]
    NotUnitNorm(f64),

    #[error("cannot build {k} contrasts from {m} points")]
    TooManyContrasts { m: usize, k: usize },

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),
}

/// Which index family a degenerate weight sum belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row,
    Column,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::Row => f.write_str("row"),
            Axis::Column => f.write_str("column"),
        }
    }
}

impl RsvdError {
    /// True for failures caused by the weights collapsing, at any nesting depth.
    pub fn is_degenerate(&self) -> bool {
        match self {
            RsvdError::DegenerateWeights { .. } => true,
            RsvdError::Layer { source, .. } => source.is_degenerate(),
            _ => false,
        }
    }

    pub(crate) fn in_layer(self, layer: usize) -> Self {
        RsvdError::Layer {
            layer,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, RsvdError>;
