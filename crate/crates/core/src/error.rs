//! Error type shared by all core modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mesh construction failed: {0}")]
    Construction(String),

    #[error("non-manifold mesh: {0}")]
    NonManifold(String),

    #[error("degenerate triangle {index}: area {area:.3e}")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("degenerate boundary loop {index}: {vertices} vertices")]
    DegenerateLoop { index: usize, vertices: usize },

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("mesh has no boundary")]
    EmptyBoundary,

    #[error("eigensolver hit the iteration limit ({iterations}); worst residual {worst_residual:.3e}")]
    IterationLimit {
        iterations: usize,
        worst_residual: f64,
        best_residuals: Vec<f64>,
    },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("rank deficiency at member {index}: {detail}")]
    RankDeficient { index: usize, detail: String },

    #[error("mesh carries no density field but the operation requires one")]
    MissingDensity,

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("center-of-mass balancing failed: moment norm {moment:.3e} after {iterations} iterations")]
    NonBalanceable { moment: f64, iterations: usize },

    #[error("stereographic inverse undefined at the projection pole")]
    Pole,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
