pub type Result<T, E = ModelError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Core(#[from] lpssl_core::Error),
    #[error(transparent)]
    Autodiff(#[from] lpssl_autodiff::Error),
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Shape(String),
    #[error("empty negative link set")]
    NoNegatives,
    #[error("no training edges")]
    NoTrainingEdges,
    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),
}
