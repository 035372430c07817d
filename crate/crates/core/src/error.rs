use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("basis of {requested} configurations exceeds the cap of {cap}")]
    BasisTooLarge { requested: u128, cap: usize },

    #[error("coefficient vector is not normalized (norm^2 = {0})")]
    Unnormalized(f64),

    #[error("gamma function pole at x = {0}")]
    GammaPole(f64),

    #[error("Kummer U evaluation paths disagree by {disagreement:e} at x = {x} (a = {a})")]
    PrecisionLoss { a: f64, x: f64, disagreement: f64 },

    #[error("no sign change bracketing the ground-branch root; scanned: {trace}")]
    BracketFailure { trace: String },

    #[error("box too small: {0}")]
    BoxTooSmall(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("step rejected at t = {time}: norm deviation {deviation:e} (dt too large?)")]
    StepRejected { time: f64, deviation: f64 },

    #[error("relaxation did not converge after {iterations} iterations (last |dE| = {last_delta:e})")]
    NotConverged { iterations: usize, last_delta: f64 },

    #[error("density reached the box edge at t = {time} (edge density fraction {edge:e})")]
    BoxOverflow { time: f64, edge: f64 },

    #[error("{0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
