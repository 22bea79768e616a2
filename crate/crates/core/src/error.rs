use thiserror::Error;

/// Errors raised by the percoflow library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty box: interval {axis} has lo >= hi")]
    EmptyBox { axis: usize },
    #[error("domain needs at least one source face and one sink face")]
    NoSourceOrSink,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("not a unit vector (norm {norm})")]
    NotUnit { norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cylinder half-height must be positive, got {0}")]
    NonpositiveHeight(f64),
    #[error("discretization at mesh {n} is empty")]
    EmptyDiscretization { n: u32 },
    #[error("cylinder instance contains no lattice edge")]
    EmptyInstance,
    #[error("terminal set {0} is empty")]
    EmptyTerminal(&'static str),
    #[error("source and sink terminal sets overlap")]
    OverlappingTerminals,
    #[error("total capacity exceeds 2^62 quantized units")]
    CapacityOverflow,
    #[error("no tabulated direction close enough to {0:?}")]
    MissingDirection(Vec<f64>),
    #[error("degenerate triangle")]
    DegenerateTriangle,
    #[error("invalid capacity law: {0}")]
    InvalidLaw(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
