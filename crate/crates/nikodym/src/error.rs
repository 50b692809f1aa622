use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("invalid metric parameters: {0}")]
    BadParams(String),
    #[error("metric is not positive definite at {0:?}")]
    Singular([f64; 3]),
    #[error("expression error: {0}")]
    Parse(String),
    #[error("geodesic left the domain at t = {t}")]
    DomainExit { t: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("tube leaves the grid box")]
    TubeOutsideGrid,
    #[error("empty geodesic family at {0:?}")]
    EmptyFamily([f64; 3]),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
