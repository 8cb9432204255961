use thiserror::Error;

/// Errors raised by the geometry kernels, solvers, diagnostics and experiments.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("invalid tangent vector: {0}")]
    InvalidTangent(String),
    #[error("point lies on or within tolerance of the cut locus (distance ratio {ratio:.3e})")]
    CutLocus { ratio: f64 },
    #[error("argument outside domain: {0}")]
    DomainError(String),
    #[error("operation not supported on this manifold: {0}")]
    UnsupportedManifold(String),
    #[error("invalid manifold: {0}")]
    InvalidManifold(String),
    #[error("solver did not converge after {iters} iterations (gradient norm {grad_norm:.3e})")]
    NonConvergence { iters: usize, grad_norm: f64 },
    #[error("too many sample points on the cut locus of the iterate ({skipped} of {total})")]
    CutLocusAbort { skipped: usize, total: usize },
    #[error("degenerate model: aggregate energy is zero")]
    DegenerateModel,
    #[error("correction matrix is singular (condition number {condition:.3e})")]
    SingularCorrection { condition: f64 },
    #[error("point clouds differ in size or dimension ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("cloud size {size} exceeds exact assignment cap {cap}; use the resampled estimator")]
    CapExceeded { size: usize, cap: usize },
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
