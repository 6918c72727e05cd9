use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("non-finite amplitude at index {index}")]
    NonFiniteAmplitude { index: usize },

    #[error("invalid bipartition: {0}")]
    InvalidBipartition(String),

    #[error("coefficients are not sorted in descending order")]
    UnsortedInput,

    #[error("expected a bipartite state, found {parties} parties")]
    NotBipartite { parties: usize },

    #[error("expected a tripartite state, found {parties} parties")]
    NotTripartite { parties: usize },

    #[error("operator is not unitary (residual = {residual:e})")]
    NotUnitary { residual: f64 },

    #[error("basis is not orthonormal (residual = {residual:e})")]
    NonOrthonormalBasis { residual: f64 },

    #[error("operation is not simulable (off-block residual = {offblock_residual:e})")]
    NotSimulable { offblock_residual: f64 },

    #[error("Schmidt supports differ: source rank {source_rank}, target rank {target_rank}")]
    RankMismatch { source_rank: usize, target_rank: usize },

    #[error("source measurement set is incomplete (residual = {residual:e})")]
    IncompleteSource { residual: f64 },

    #[error("source operators leave the target frame (residual = {residual:e})")]
    SupportLeak { residual: f64 },

    #[error("outcome {outcome} has zero probability (norm = {norm:e})")]
    ZeroProbabilityBranch { outcome: usize, norm: f64 },

    #[error("equation requires row {row} outside the support of the reduced state")]
    SingularSupport { row: usize },

    #[error("infeasible spectrum: {0}")]
    InfeasibleSpectrum(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}
