use thiserror::Error;

/// Errors raised by grid construction, preparation validation and the analyses built on them.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid too coarse: {nodes} nodes, stencil needs {width}")]
    GridTooCoarse { nodes: usize, width: usize },

    #[error("field is not finite at node {index}")]
    NonFinite { index: usize },

    #[error("field length {got} does not match grid ({expected} nodes)")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("negative density {value} at node {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("density integrates to {integral}, expected 1")]
    NotNormalized { integral: f64 },

    #[error("boundary decay violated: edge density {edge} exceeds {limit}")]
    BoundaryDecayViolated { edge: f64, limit: f64 },

    #[error("phase undefined region: density below floor inside the support at q = {q}")]
    PhaseUndefined { q: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hbar mismatch: {0} vs {1}")]
    HbarMismatch(f64, f64),

    #[error("audit requires independent preparations")]
    NotProduct,

    #[error("insufficient samples: {got} < {min}")]
    InsufficientSamples { got: usize, min: usize },

    #[error("degenerate density: support is a single node")]
    DegenerateDensity,

    #[error("model inconsistency: {0}")]
    ModelInconsistency(String),

    #[error("wave function not normalized: norm {norm}")]
    WaveFunctionNotNormalized { norm: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
