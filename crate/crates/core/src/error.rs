use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("graph is disconnected ({reached} of {total} vertices reachable from the first)")]
    Disconnected { reached: usize, total: usize },

    #[error("line {line}: {what} must be positive, got {value}")]
    NonPositive {
        line: usize,
        what: &'static str,
        value: f64,
    },

    #[error("line {line}: duplicate edge {a} -- {b}")]
    DuplicateEdge { line: usize, a: String, b: String },

    #[error("malformed builtin descriptor `{0}`")]
    Descriptor(String),

    #[error("vertex count {count} exceeds the cap of {cap}")]
    TooLarge { count: usize, cap: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operation needs a dense semigroup but the space has {n} vertices (cap {cap})")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("space has no grid coordinates")]
    NoCoordinates,

    #[error("function mean is {mean:e}, expected zero")]
    NonzeroMean { mean: f64 },

    #[error("exponent relation violated: {0}")]
    ExponentRelation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
