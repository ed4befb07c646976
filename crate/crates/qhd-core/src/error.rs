//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QhdError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("NaN detected at step {step}")]
    NanDetected { step: usize },

    #[error("need at least {needed} frames, got {got}")]
    InsufficientFrames { needed: usize, got: usize },

    #[error("unsupported representation for this operation: {0}")]
    Representation(String),

    #[error(
        "boost coverage violation: primed slice needs t in [{t_min_needed}, {t_max_needed}] \
         but trajectory covers [{t_min_have}, {t_max_have}]"
    )]
    CoverageViolation {
        t_min_needed: f64,
        t_max_needed: f64,
        t_min_have: f64,
        t_max_have: f64,
    },

    #[error("positive-branch projection failed: negative-energy weight {weight:.3e} > 1e-3")]
    BranchProjection { weight: f64 },

    #[error("node mask covers {fraction:.1}% of the grid at step {step}, aborting")]
    NodeMaskGrowth { fraction: f64, step: usize },

    #[error("non-uniform vector potential is not supported by the Pauli stepper")]
    NonUniformVectorPotential,

    #[error("invalid noise spec: {0}")]
    InvalidNoiseSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("unknown field name {0:?}, expected one of {1}")]
    UnknownField(String, &'static str),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed QHD1 record: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, QhdError>;
