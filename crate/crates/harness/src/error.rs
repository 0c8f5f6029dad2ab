use std::path::PathBuf;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] lpssl_core::Error),
    #[error(transparent)]
    Model(#[from] lpssl_models::ModelError),
    #[error(transparent)]
    Eval(#[from] lpssl_eval::EvalError),
    #[error(transparent)]
    Stats(#[from] lpssl_eval::StatsError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset `{name}` not found under {root} (set LPSSL_DATA_ROOT)")]
    DatasetNotFound { name: String, root: PathBuf },
    #[error("all {0} search trials failed")]
    AllTrialsFailed(usize),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("{0}")]
    Results(String),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}
