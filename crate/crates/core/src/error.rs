use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("size overflow: {0}")]
    Size(String),

    #[error("memory budget exceeded: {0}")]
    Budget(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    /// The shifted matrix could not be factorized. Retry with `shift + suggested`.
    #[error("shifted matrix is singular at shift {shift}; suggested perturbation {suggested}")]
    SingularShift {
        shift: Complex64,
        suggested: Complex64,
    },

    #[error("matrix is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("null space is degenerate: {} eigenvalues near zero ({0:?})", .0.len())]
    DegenerateNullSpace(Vec<Complex64>),

    #[error("physical block has zero trace")]
    ZeroTrace,

    #[error("no eigenvalue beyond the leading one: sector dimension {0}")]
    NoGap(usize),

    #[error("symmetry violation: entry ({row}, {col}) of magnitude {magnitude:.3e} couples charge {from} to {to}")]
    SymmetryViolation {
        row: usize,
        col: usize,
        magnitude: f64,
        from: i64,
        to: i64,
    },

    #[error("no sector with charge {0}")]
    MissingSector(i64),

    #[error("time step collapsed to {step:.3e} at t = {t}; the problem is stiff, use spectral propagation")]
    Stiff { t: f64, step: f64 },

    #[error("eigenvalue {eigenvalue} fails the realness gate |Im|/scale < {gate:e}")]
    Realness { eigenvalue: Complex64, gate: f64 },

    #[error("phase split failed: {0}")]
    Split(String),

    #[error("ambiguous eigenvalue pairing: {0} and {1} are equidistant")]
    AmbiguousPairing(Complex64, Complex64),

    #[error("Markovian embedding unsupported: {0}")]
    EmbeddingUnsupported(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
