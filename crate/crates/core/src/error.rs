use thiserror::Error;

/// Errors produced by the simulation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid modulation order {0}: must be a power of two >= 4")]
    InvalidOrder(usize),
    #[error("invalid distinct point count {n} for order {m}: must be even and in 2..={m}")]
    InvalidDistinctCount { m: usize, n: usize },
    #[error("shaping parameter rho = {0} outside [0, 1]")]
    InvalidRho(f64),
    #[error("rho = 0 selects uniform PAM and requires N = M (got N = {n}, M = {m})")]
    UniformRequiresFullSize { m: usize, n: usize },
    #[error("merging indices {0} and {1} does not yield a natural number")]
    NonIntegralMerge(u32, u32),
    #[error("Gray rank {k} out of range 1..={max}")]
    RankOutOfRange { k: usize, max: usize },
    #[error("bit level {level} out of range for {bits}-bit labels")]
    LevelOutOfRange { level: usize, bits: usize },
    #[error("constellation amplitudes are all zero")]
    ZeroEnergy,
    #[error("length {0} is not a supported transform size (power of two required)")]
    UnsupportedLength(usize),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("signal has zero power")]
    ZeroPower,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("channel coefficient on subcarrier {0} is zero")]
    ZeroChannel(usize),
    #[error("receiver parameters do not match the transmitter: {0}")]
    ParameterMismatch(String),
    #[error("no observations supplied")]
    EmptyObservations,
    #[error("evaluation failed at N = {n}, rho = {rho}: {source}")]
    Cell {
        n: usize,
        rho: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("malformed constellation table, line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
