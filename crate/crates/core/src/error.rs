use thiserror::Error;

/// Every failure mode of the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("level {n} out of range (n_max = {n_max})")]
    Range { n: usize, n_max: usize },
    #[error("time {t} outside trajectory span [0, {t_end}]")]
    TimeRange { t: f64, t_end: f64 },
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("truncation: {0}")]
    Truncation(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("collisional phase ill-defined at t = {t}: |O0| = {abs}")]
    PhaseIllDefined { t: f64, abs: f64 },
    #[error("grid resolution: {0}")]
    Resolution(String),
    #[error("domain too small: |psi| = {amplitude:e} at the boundary (t = {t})")]
    DomainTooSmall { t: f64, amplitude: f64 },
    #[error("accuracy: {0}")]
    Accuracy(String),
    #[error("not a trap: {0}")]
    NotATrap(String),
    #[error("spin-flip hazard: |B| = 0 at x = {x}, z = {z}")]
    SpinFlipHazard { x: f64, z: f64 },
    #[error("internal consistency: {0}")]
    Consistency(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, stable across versions.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Range { .. } => "range",
            Error::TimeRange { .. } => "time_range",
            Error::SolverFailure(_) => "solver_failure",
            Error::Truncation(_) => "truncation",
            Error::Contract(_) => "contract",
            Error::PhaseIllDefined { .. } => "phase_ill_defined",
            Error::Resolution(_) => "resolution",
            Error::DomainTooSmall { .. } => "domain_too_small",
            Error::Accuracy(_) => "accuracy",
            Error::NotATrap(_) => "not_a_trap",
            Error::SpinFlipHazard { .. } => "spin_flip_hazard",
            Error::Consistency(_) => "consistency",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
