use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field domain mismatch: expected {expected}, found {found}")]
    DomainMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("mode index {index:?} outside [-{half}, {half})")]
    ModeOutOfRange { index: [i64; 4], half: i64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("elliptic solve did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("elliptic failure while assembling {term}: {source}")]
    Elliptic {
        term: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("time step {dt} violates the CFL guard; use dt <= {suggested}")]
    CflViolation { dt: f64, suggested: f64 },

    #[error("constraint violated at t = {t}: ||div A|| = {residual:.3e} > {tolerance:.1e}")]
    ConstraintViolation { t: f64, residual: f64, tolerance: f64 },

    #[error("Picard iteration diverged (omega grew for 3 consecutive iterates, last {last_omega:.3e}); try a smaller T, e.g. T <= {suggested_t}")]
    PicardDivergence { last_omega: f64, suggested_t: f64 },

    #[error("time {t} outside the stored window [0, {t_max}] or off the sample grid")]
    TimeOutOfRange { t: f64, t_max: f64 },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
