use thiserror::Error;

/// Errors produced by the solver kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field has {got} values, grid expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("density input sums to zero")]
    AllZeroInput,
    #[error("density input has a negative value {value} at cell {index}")]
    NegativeInput { index: usize, value: f64 },
    #[error("non-finite value at cell {index}")]
    NonFiniteInput { index: usize },
    #[error("grid with {cells} cells exceeds the brute-force limit of {limit}")]
    TooLarge { cells: usize, limit: usize },
    #[error("right-hand side has mean {mean:e}; Neumann problem needs zero mean")]
    NonZeroMean { mean: f64 },
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("iterate became non-finite at t={iteration}; best dual value so far {best_value}")]
    NonFiniteIterate { iteration: usize, best_value: f64 },
    #[error("objective decreased by {drop:e} under the double c-transform at t={iteration}")]
    MonotonicityViolated { iteration: usize, drop: f64 },
    #[error("operation needs a one-dimensional grid, got d={0}")]
    NotOneDimensional(usize),
    #[error("point lists differ in length: {0} vs {1}")]
    SizeMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, Error>;
