use thiserror::Error;

/// Errors surfaced by grid operations, solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid axis {axis} has {n} points; need an even count >= 8")]
    BadGridSize { axis: usize, n: usize },

    #[error("grid dimension {0} unsupported (1, 2 or 3)")]
    BadDimension(usize),

    #[error("grid axis {axis} has non-positive length {len}")]
    BadGridLength { axis: usize, len: f64 },

    #[error("field value count {got} does not match grid ({expected})")]
    BadFieldSize { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("states are at different times ({a} vs {b})")]
    TimeMismatch { a: f64, b: f64 },

    #[error("non-finite value in field")]
    NonFinite,

    #[error("near-zero vector at grid point {index} (|v| = {norm:.3e}); cannot normalize")]
    DegeneratePoint { index: usize, norm: f64 },

    #[error("initial data incompatible: max |d_in . dtilde_in| = {max_dot:.3e} exceeds 1e-8")]
    IncompatibleInitialData { max_dot: f64 },

    #[error("solver diverged at t = {t}")]
    Diverged { t: f64 },

    #[error("Sobolev order {k} unsupported (max {max})")]
    UnsupportedOrder { k: usize, max: usize },

    #[error("eps = {0} outside (0, 1/2)")]
    EpsOutOfRange(f64),

    #[error("trace has {0} samples; need at least {1}")]
    TraceTooShort(usize, usize),

    #[error("energy bound undefined at t = {t}: denominator {denom:.3e} <= 0 (t beyond the guaranteed horizon)")]
    BoundUndefined { t: f64, denom: f64 },

    #[error("rate fit rejected: {0}")]
    DegenerateFit(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("malformed field file: {0}")]
    BadFieldFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
