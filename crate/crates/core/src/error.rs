use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid tree shape: {0}")]
    InvalidShape(String),

    #[error("invalid cluster: {0}")]
    InvalidCluster(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("configuration is not stable: vertex {vertex} has height {height}")]
    Unstable { vertex: String, height: u8 },

    #[error("{what} of size {size} exceeds the limit of {limit}")]
    SizeGuard {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("cluster is not a chain of cells")]
    NotAChain,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
