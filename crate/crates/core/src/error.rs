use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} outside its domain: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("[{tag}] {source}")]
    Experiment {
        tag: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{} experiment(s) failed: {}", .0.len(), join_errors(.0))]
    Experiments(Vec<Error>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join_errors(errors: &[Error]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn tagged(self, tag: &str) -> Self {
        Error::Experiment {
            tag: tag.to_string(),
            source: Box::new(self),
        }
    }
}
