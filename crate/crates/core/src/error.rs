use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("beamwidth formula invalid for electrically small aperture (K*d_v = {aperture:.4} <= 1.391/pi)")]
    SmallAperture { aperture: f64 },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("singular or rank-deficient matrix: {0}")]
    Singular(String),

    #[error("zero channel vector")]
    ZeroChannel,

    #[error("quadrature did not converge: estimated error {error:.3e} exceeds tolerance {tolerance:.3e}")]
    QuadratureNotConverged { error: f64, tolerance: f64 },

    #[error("semidefinite solver failed: {0}")]
    SolverFailure(String),

    #[error("leakage caps infeasible for cell {cell}: smallest achievable excess {excess:.3e}")]
    InfeasibleCaps { cell: usize, excess: f64 },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("trial {trial} (seed {seed}) failed: {source}")]
    Trial {
        trial: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
