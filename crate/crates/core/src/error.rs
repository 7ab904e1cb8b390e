use thiserror::Error;

/// Errors produced by the estimators, diagnostics and baselines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular design: column {column} is linearly dependent on earlier columns")]
    Singular { column: usize },

    #[error("singular expression: {0}")]
    ZeroDenominator(String),

    #[error("training diverged after {epochs} epochs (last stable weight {last_stable})")]
    Divergence { epochs: usize, last_stable: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("trial {index} failed: {source}")]
    Trial {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_probability(p: f64, name: &str) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in (0, 1), got {p}")))
    }
}
