use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// Smallest symplectic eigenvalue is below one by more than the tolerance.
    #[error("covariance matrix is not bona fide: smallest symplectic eigenvalue {0}")]
    Unphysical(f64),

    #[error("matrix is not symplectic (deviation {0:e})")]
    NotSymplectic(f64),

    #[error("mode index {index} out of range for a {n_modes}-mode state")]
    ModeIndex { index: usize, n_modes: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("measured quadrature variance {0:e} is too small to condition on")]
    DegenerateMeasurement(f64),

    #[error("cannot measure the only remaining mode")]
    NothingLeft,

    #[error("drift matrix is not stable (largest real part {0:e})")]
    Unstable(f64),

    #[error("Lyapunov residual {0:e} exceeds tolerance")]
    LyapunovResidual(f64),

    #[error("rejection sampling exhausted after {0} attempts")]
    SamplingExhausted(usize),

    #[error("singular linear system")]
    Singular,
}
