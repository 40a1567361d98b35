//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GwError>;

/// Failure modes of the numerical operations.
///
/// The variant name doubles as the stable error identifier reported by the
/// CLI (exit code 1 prints `name(): message`).
#[derive(Debug, Clone, Error)]
pub enum GwError {
    /// Matrix input is structurally unusable (non-square, empty, non-finite
    /// entries, unsorted eigenvalue list, ...).
    #[error("InvalidMatrix: {0}")]
    InvalidMatrix(String),

    /// A positive semi-definite matrix was required but the input has a
    /// significantly negative eigenvalue.
    #[error("NotPsd: {0}")]
    NotPsd(String),

    /// Dimensions of the operands do not line up.
    #[error("DimError: {0}")]
    DimError(String),

    /// The top-left block of a joint covariance must be positive definite
    /// before its Schur complement can be formed.
    #[error("SingularBlock: {0}")]
    SingularBlock(String),

    /// A strictly positive spectrum was required.
    #[error("NotPositiveDefinite: {0}")]
    NotPositiveDefinite(String),

    /// Input collapses the optimization (e.g. an all-zero spectrum).
    #[error("DegenerateInput: {0}")]
    DegenerateInput(String),

    /// The source measure must have rank at least that of the target;
    /// the caller should swap the arguments.
    #[error("OrientationError: {0}")]
    OrientationError(String),

    /// Coupling matrix violates the marginal constraints.
    #[error("InvalidPlan: {0}")]
    InvalidPlan(String),

    /// Point-cloud weights are negative or do not sum to one.
    #[error("InvalidWeights: {0}")]
    InvalidWeights(String),

    /// Operation requires empirically centered clouds.
    #[error("NotCentered: {0}")]
    NotCentered(String),

    /// Sinkhorn iterations produced non-finite values; a larger epsilon
    /// usually fixes it.
    #[error("ScaleError: {0}")]
    ScaleError(String),

    /// Exhaustive search is only available at desk scale.
    #[error("TooLarge: {0}")]
    TooLarge(String),

    /// Requested configuration is outside what the operation supports.
    #[error("Unsupported: {0}")]
    Unsupported(String),
}

impl GwError {
    /// Stable short name of the variant, e.g. `"NotPsd"`.
    pub fn name(&self) -> &'static str {
        match self {
            GwError::InvalidMatrix(_) => "InvalidMatrix",
            GwError::NotPsd(_) => "NotPsd",
            GwError::DimError(_) => "DimError",
            GwError::SingularBlock(_) => "SingularBlock",
            GwError::NotPositiveDefinite(_) => "NotPositiveDefinite",
            GwError::DegenerateInput(_) => "DegenerateInput",
            GwError::OrientationError(_) => "OrientationError",
            GwError::InvalidPlan(_) => "InvalidPlan",
            GwError::InvalidWeights(_) => "InvalidWeights",
            GwError::NotCentered(_) => "NotCentered",
            GwError::ScaleError(_) => "ScaleError",
            GwError::TooLarge(_) => "TooLarge",
            GwError::Unsupported(_) => "Unsupported",
        }
    }
}
