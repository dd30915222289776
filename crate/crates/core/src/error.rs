use std::path::PathBuf;

/// Errors produced anywhere in the multiscale pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("degenerate grid: cell {cell} has non-positive volume {volume:e}")]
    DegenerateGrid { cell: usize, volume: f64 },

    #[error("format error in {path}: expected {expected} tokens, found {found}")]
    Format {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("data error in {path}: token {token} (cell {cell}) has non-positive or unparsable value {text:?}")]
    Data {
        path: PathBuf,
        token: usize,
        cell: usize,
        text: String,
    },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("singular matrix: no usable pivot at elimination step {pivot}")]
    Singular { pivot: usize },

    #[error("ILU0 factorization broke down: zero pivot in row {row}")]
    ZeroPivot { row: usize },

    #[error("direct solve of order {order} needs {required} band entries, budget is {budget}")]
    TooLarge {
        order: usize,
        required: usize,
        budget: usize,
    },

    #[error("invalid operator: non-positive diagonal {value:e} in row {row}")]
    InvalidOperator { row: usize, value: f64 },

    #[error("basis smoothing diverged at sweep {sweep}: cell {cell} has 1 + s = {denominator:e}")]
    BasisDivergence {
        sweep: usize,
        cell: usize,
        denominator: f64,
    },

    #[error("iteration broke down at cycle {cycle}: residual is not finite")]
    Breakdown { cycle: usize, history: Vec<f64> },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
