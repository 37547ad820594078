use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected {expected} nodes, got {actual}")]
    GridMismatch { expected: usize, actual: usize },

    #[error(
        "enumerated critical lengths (l, j <= {l_max}, {j_max}) do not bracket L = {length}"
    )]
    RangeInsufficient {
        length: f64,
        l_max: usize,
        j_max: usize,
    },

    #[error(
        "L = {length} is a critical length (distance {distance:.3e} to the set \
         2*pi*sqrt((l^2 + l*j + j^2)/3)); the linearized system is not controllable"
    )]
    CriticalLength { length: f64, distance: f64 },

    #[error("located {found} distinct eigenvalues, {requested} requested")]
    RootCountMismatch { requested: usize, found: usize },

    #[error("degenerate mode {index}: {reason}")]
    DegenerateMode { index: i32, reason: String },

    #[error("Gram matrix deviates from identity by {deviation:.3e} (tolerance {tolerance:.1e})")]
    GramFailure { deviation: f64, tolerance: f64 },

    #[error("basis invariant violated for mode {index}: {reason}")]
    BasisInvariant { index: i32, reason: String },

    #[error("coupling entry ({row}, {col}) has vanishing denominator {magnitude:.3e}")]
    SingularEntry {
        row: usize,
        col: usize,
        magnitude: f64,
    },

    #[error("coefficient system ill conditioned: estimated condition number {condition:.3e}")]
    IllConditioned { condition: f64 },

    #[error("coefficient solve inaccurate: {0}")]
    SolveInaccurate(String),

    #[error("phi'_{index}(0) vanishes; cannot normalize perturbed mode")]
    DivideByZero { index: i32 },

    #[error("kernel not real: max |Im k| = {max_imag:.3e}, max |Re k| = {max_real:.3e}")]
    RealnessViolation { max_imag: f64, max_real: f64 },

    #[error("kernel boundary edge not zero: max |k| on edges = {max_edge:.3e}")]
    BoundaryViolation { max_edge: f64 },

    #[error("test function not admissible: {0}")]
    InadmissibleTestFunction(String),

    #[error("transform factorization is stale for the supplied kernel")]
    FactorizationStale,

    #[error("I - K is numerically singular")]
    SingularTransform,

    #[error("time-step matrix is singular at row {row}")]
    SingularStepMatrix { row: usize },

    #[error("fixed-point iteration diverged at t = {time} after {iterations} iterations (gap {gap:.3e})")]
    PicardDiverged {
        time: f64,
        iterations: usize,
        gap: f64,
    },

    #[error("initial data violate v(0) = v(L) = 0 (|v(0)| = {left:.3e}, |v(L)| = {right:.3e}); pass --project to enforce")]
    NonConformingInitialData { left: f64, right: f64 },

    #[error("decay fit window degenerate: {0}")]
    DegenerateWindow(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("kernel cache checksum mismatch in {path}")]
    ChecksumMismatch { path: PathBuf },

    #[error("kernel cache {path} malformed: {reason}")]
    CacheFormat { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 1 usage, 2 mathematical precondition, 3 I/O or
    /// integrity failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidGrid(_) | Error::NonConformingInitialData { .. } => 1,
            Error::ChecksumMismatch { .. } | Error::CacheFormat { .. } | Error::Io(_) => 3,
            _ => 2,
        }
    }
}
