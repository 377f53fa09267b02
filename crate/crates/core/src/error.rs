use thiserror::Error;

/// Top-level error for operations that touch files or combine subsystems.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Parse(#[from] crate::problem::ParseError),
    #[error(transparent)]
    Trace(#[from] crate::problem::TraceError),
    #[error(transparent)]
    Model(#[from] crate::gbdt::ModelError),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Train(#[from] crate::gbdt::TrainError),
    #[error(transparent)]
    Server(#[from] crate::server::ServerError),
    #[error(transparent)]
    Prover(#[from] crate::prover::ProverError),
    #[error("{0}")]
    Invalid(String),
}
