//! Error type shared across the crate.

/// Unified error for domain construction, file parsing, and solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied parameter is out of its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Rasterization produced a mask that is not 4/6-connected.
    #[error("disconnected rasterization: {0}")]
    Disconnected(String),

    /// Masks below the minimum size carry no usable geometry.
    #[error("mask too small: {true_cells} true cells, minimum is 9")]
    MaskTooSmall { true_cells: usize },

    /// The mask violates a structural invariant (border, extent, ...).
    #[error("invalid mask: {0}")]
    InvalidMask(String),

    /// Text-format parse failure with a 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A discrete linear system admits no solution at the requested tolerance.
    #[error("infeasible discrete system: residual {residual:.3e}")]
    Infeasible { residual: f64 },

    /// A curve operation hit geometry it cannot represent.
    #[error("curve error: {0}")]
    Curve(String),

    /// The requested operation is not defined for this input.
    #[error("unsupported: {0}")]
    Unsupported(String),
}
