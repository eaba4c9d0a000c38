use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter block is incomplete or out of range.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing parameter `{0}`")]
    MissingParameter(String),

    /// The inputs lie outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration blew up at step {index} (state left the bounded region)")]
    IntegrationBlowup { index: usize },

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("step too large: two sign changes in consecutive steps near step {index} (h = {h}); reduce h")]
    StepTooLarge { index: usize, h: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("estimation failure: {0}")]
    EstimationFailure(String),

    #[error("no scaling range with R² ≥ {threshold}; best R² achieved was {best_r2:.4}")]
    ScalingRangeNotFound { best_r2: f64, threshold: f64 },

    #[error("map is not unimodal: interior extrema at {extrema:?}")]
    NotUnimodal { extrema: Vec<f64> },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
