use thiserror::Error;

/// Errors surfaced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("multi-index order {order} exceeds the factorial cap {cap}")]
    OrderCapExceeded { order: u64, cap: u64 },
    #[error("index set would hold {cardinality} entries, above the cap {cap}")]
    SizeCapExceeded { cardinality: u128, cap: u128 },
    #[error("triple of multi-indices is not complete")]
    NotComplete,
    #[error("no coordinate value supplied for slot (i={time_mode}, k={noise_mode})")]
    MissingCoordinate { time_mode: u32, noise_mode: u32 },
    #[error("grid shape mismatch: expected {expected} points per axis, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("advecting field is not flagged divergence-free")]
    NotDivergenceFree,
    #[error("spectrum tensor is undefined at the zero wavevector")]
    ZeroWavevector,
    #[error("noise cutoff {cutoff} outside the valid range 1..={max}")]
    CutoffOutOfRange { cutoff: usize, max: usize },
    #[error("ellipticity check failed: delta = {delta} is not positive")]
    NotElliptic { delta: f64 },
    #[error("time {t} outside the basis horizon [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("state is defined on a different index set than the system")]
    IndexSetMismatch,
    #[error("advective CFL estimate {cfl:.3} exceeds 1 at t = {t}")]
    CflViolation { cfl: f64, t: f64 },
    #[error("non-finite value detected at t = {t}")]
    NumericalFailure { t: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("snapshot i/o: {0}")]
    SnapshotIo(#[from] std::io::Error),
    #[error("snapshot format: {0}")]
    SnapshotFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
