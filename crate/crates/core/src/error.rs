use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is disconnected")]
    Disconnected,
    #[error("vertex {vertex} out of range for a graph with {n_vertices} vertices")]
    VertexOutOfRange { vertex: usize, n_vertices: usize },
    #[error("edge {edge} out of range for a graph with {n_edges} edges")]
    EdgeOutOfRange { edge: usize, n_edges: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("contraction leaves a graph without edges")]
    EmptyAfterContraction,
    #[error("{what} has size {actual}, exceeding the cap of {limit}")]
    SizeCap {
        what: &'static str,
        actual: usize,
        limit: usize,
    },
    #[error("graph carries no planar embedding")]
    MissingEmbedding,
    #[error("embedding is not planar (Euler characteristic {0})")]
    NonPlanar(i64),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("linear solve failed: {0}")]
    Solve(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),
    #[error("incompatible inputs: {0}")]
    Incompatible(String),
    #[error("insufficient range: {0}")]
    InsufficientRange(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
