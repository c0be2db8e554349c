use thiserror::Error;

#[derive(Debug, Error)]
pub enum QgError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("field is not mean-zero (domain average {mean:e})")]
    NotMeanZero { mean: f64 },

    #[error("boundary flux has a nonzero (0,0) coefficient; the Neumann problem is incompatible")]
    IncompatibleFlux,

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("step misaligned with the noise grid: {0}")]
    Misaligned(String),

    #[error("noise path covers [{have_min}, {have_max}] but [{need_min}, {need_max}] is required")]
    PathCoverage {
        need_min: f64,
        need_max: f64,
        have_min: f64,
        have_max: f64,
    },

    #[error("CFL violation at t={t}: dt={dt} exceeds the advective limit; use dt <= {suggested:e}")]
    Cfl { t: f64, dt: f64, suggested: f64 },

    #[error("non-finite state at t={t}: {what}")]
    NonFinite { t: f64, what: String },

    #[error("blow-up guard tripped at t={t}: |u|_H = {norm:e} exceeds {limit:e}")]
    BlowUp { t: f64, norm: f64, limit: f64 },

    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl QgError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            QgError::Cfl { .. }
                | QgError::NonFinite { .. }
                | QgError::BlowUp { .. }
                | QgError::Eigensolver(_)
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            QgError::InvalidInput(_) => "invalid_input",
            QgError::ShapeMismatch { .. } => "shape_mismatch",
            QgError::NotMeanZero { .. } => "not_mean_zero",
            QgError::IncompatibleFlux => "incompatible_flux",
            QgError::Eigensolver(_) => "eigensolver",
            QgError::Misaligned(_) => "misaligned",
            QgError::PathCoverage { .. } => "path_coverage",
            QgError::Cfl { .. } => "cfl",
            QgError::NonFinite { .. } => "non_finite",
            QgError::BlowUp { .. } => "blow_up",
            QgError::Config(_) => "config",
            QgError::Format(_) => "format",
            QgError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, QgError>;
