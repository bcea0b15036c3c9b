use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("grid too coarse: j_max = {j_max} (need at least 1)")]
    GridTooCoarse { j_max: i32 },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("CFL violation: dt = {dt:e} exceeds admissible dt = {admissible:e}")]
    Cfl { dt: f64, admissible: f64 },
    #[error("ellipticity failure: {0}")]
    Ellipticity(String),
    #[error("phase-space exit at t = {t}: grid point {point}, state {state:?}")]
    PhaseExit { t: f64, point: usize, state: Vec<f64> },
    #[error("pointwise deviation {deviation:e} exceeds d1 = {bound:e} at t = {t}, grid point {point}")]
    Deviation { t: f64, point: usize, deviation: f64, bound: f64 },
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("missing record: {0}")]
    MissingRecord(String),
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for the errors that mean the state left the admissible set.
    pub fn is_phase_abort(&self) -> bool {
        matches!(self, Error::PhaseExit { .. } | Error::Deviation { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
