use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("no edges found in {0}")]
    EmptyFile(PathBuf),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("graph has {have} edges, need at least {need}")]
    TooFewEdges { have: usize, need: usize },
    #[error("cannot sample {requested} negative pairs, only {available} admissible")]
    InfeasibleNegatives { requested: usize, available: usize },
    #[error("block state covers {blocks} nodes but graph has {nodes}")]
    PartitionMismatch { blocks: usize, nodes: usize },
    #[error("infeasible block counts: {0}")]
    InfeasibleCounts(String),
    #[error("{0} did not converge within {1} iterations")]
    NoConvergence(&'static str, usize),
    #[error("augmentation `{0}` requires a block state")]
    MissingBlockState(String),
    #[error("community detector `{0}` is not available: {1}")]
    DetectorUnavailable(String, String),
    #[error("dataset `{name}` mismatch: {msg}")]
    DatasetMismatch { name: String, msg: String },
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("invalid manifest: {0}")]
    Manifest(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
