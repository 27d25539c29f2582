use thiserror::Error;

/// Which tensor symmetry a raw array failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// `R_ijkl = -R_jikl`
    FirstPair,
    /// `R_ijkl = -R_ijlk`
    SecondPair,
    /// `R_ijkl = R_klij`
    PairExchange,
}

impl std::fmt::Display for Symmetry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Symmetry::FirstPair => write!(f, "antisymmetry in (i,j)"),
            Symmetry::SecondPair => write!(f, "antisymmetry in (k,l)"),
            Symmetry::PairExchange => write!(f, "pair symmetry"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("symmetry violation: {symmetry} residual {residual:e}")]
    SymmetryViolation { symmetry: Symmetry, residual: f64 },

    #[error("first Bianchi identity violated: residual {residual:e}")]
    BianchiViolation { residual: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("singular transform: {0}")]
    SingularTransform(String),

    #[error("inadmissible transform parameters: {0}")]
    Inadmissible(String),

    #[error("dimension {0} is too small for four-frame conditions (need n >= 4)")]
    DimensionTooSmall(usize),

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("optimizer did not converge on any of {starts} starts")]
    NonConvergence { starts: usize },

    #[error("oracle mismatch for {kind}: extension {extension:e}, parametric {parametric:e}")]
    OracleMismatch {
        kind: String,
        extension: f64,
        parametric: f64,
    },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("step rejected at t = {t}: symmetry drift {residual:e}")]
    StepRejected { t: f64, residual: f64 },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
