use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("ambiguous lift: step {step} exceeds admissible {limit}")]
    AmbiguousLift { step: f64, limit: f64 },
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("geometry mismatch between symbol and operator")]
    GeometryMismatch,
    #[error("eigensolver failed for `{label}`: {reason}")]
    Eigensolver { label: String, reason: String },
    #[error("near-critical energy {energy}: |grad H| = {grad_norm:.3e} below threshold {threshold:.3e}")]
    NearCritical { energy: f64, grad_norm: f64, threshold: f64 },
    #[error("contour topology error: {0}")]
    Topology(String),
    #[error("energy {energy} is not a regular value: {reason}")]
    Regularity { energy: f64, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("caustic proximity: {0}")]
    Caustic(String),
    #[error("symbol is flagged non-smooth on the torus: {0}")]
    NonSmooth(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGeometry(_) => "invalid-geometry",
            Error::AmbiguousLift { .. } => "ambiguous-lift",
            Error::Resolution(_) => "resolution",
            Error::Spec(_) => "spec",
            Error::GeometryMismatch => "geometry-mismatch",
            Error::Eigensolver { .. } => "eigensolver",
            Error::NearCritical { .. } => "near-critical",
            Error::Topology(_) => "topology",
            Error::Regularity { .. } => "regularity",
            Error::Precondition(_) => "precondition",
            Error::Caustic(_) => "caustic",
            Error::NonSmooth(_) => "non-smooth",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
