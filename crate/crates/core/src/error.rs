use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced across the certification pipeline.
///
/// Infeasibility variants carry the failing inequality (and, where known,
/// the admissible parameter range) so that a report can state exactly which
/// assumption broke instead of a bare "no certificate".
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid system definition: {0}")]
    InvalidDefinition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pair (A, B) is not controllable: controllability matrix has rank {rank} < {n}")]
    Uncontrollable { rank: usize, n: usize },

    #[error(
        "clustered eigenvalues are unsupported: minimum gap {gap:.3e} <= threshold {threshold:.3e} \
         (certification requires pairwise distinct eigenvalues)"
    )]
    RepeatedEigenvalues { gap: f64, threshold: f64 },

    #[error("closed loop is unstable: max eigenvalue real part lambda_m = {lambda_m:.6e} >= 0")]
    UnstableClosedLoop { lambda_m: f64 },

    #[error(
        "pole placement supports single-input systems only (m = 1), got m = {m}; \
         supply gain_override instead"
    )]
    MultiInput { m: usize },

    #[error(
        "pole placement missed the requested spectrum: worst eigenvalue mismatch {mismatch:.3e}"
    )]
    PlacementFailed { mismatch: f64 },

    #[error("condition (*) infeasible: {inequality}")]
    ConditionInfeasible { inequality: String },

    #[error("delta infeasible: {reason}")]
    DeltaInfeasible { reason: String },

    #[error("eigendecomposition failed: {0}")]
    Eigendecomposition(String),

    #[error("mismatched grids: {0}")]
    GridMismatch(String),
}
