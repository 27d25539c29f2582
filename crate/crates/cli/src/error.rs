use std::fmt;

/// Failure classes; each maps to its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Config,
    Io,
    Input,
    Numerical,
    InvarianceViolated,
    VerificationFailed,
    UnknownSuite,
}

impl ErrorKind {
    pub fn code(&self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::Config => 3,
            ErrorKind::Io => 4,
            ErrorKind::Input => 5,
            ErrorKind::Numerical => 6,
            ErrorKind::InvarianceViolated => 7,
            ErrorKind::VerificationFailed => 8,
            ErrorKind::UnknownSuite => 9,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Config => "config",
            ErrorKind::Io => "io",
            ErrorKind::Input => "input",
            ErrorKind::Numerical => "numerical",
            ErrorKind::InvarianceViolated => "invariance_violated",
            ErrorKind::VerificationFailed => "verification_failed",
            ErrorKind::UnknownSuite => "unknown_suite",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, message)
    }

    pub fn io(context: &str, e: impl fmt::Display) -> Self {
        Self::new(ErrorKind::Io, format!("{context}: {e}"))
    }

    /// `error kind=<name> code=<n> message=<json string>`, on one line.
    pub fn line(&self) -> String {
        let msg = serde_json::to_string(&self.message).unwrap_or_else(|_| "\"\"".into());
        format!(
            "error kind={} code={} message={}",
            self.kind.name(),
            self.kind.code(),
            msg
        )
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.name(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<curvlab_core::Error> for CliError {
    fn from(e: curvlab_core::Error) -> Self {
        use curvlab_core::Error as E;
        let kind = match &e {
            E::Config(_) | E::Inadmissible(_) | E::SingularTransform(_) => ErrorKind::Config,
            E::Io(_) => ErrorKind::Io,
            E::SymmetryViolation { .. }
            | E::BianchiViolation { .. }
            | E::DimensionMismatch { .. }
            | E::InvalidShape(_)
            | E::InvalidFrame(_)
            | E::DimensionTooSmall(_)
            | E::Format(_)
            | E::Json(_) => ErrorKind::Input,
            _ => ErrorKind::Numerical,
        };
        CliError::new(kind, e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
