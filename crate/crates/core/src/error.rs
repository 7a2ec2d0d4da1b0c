use thiserror::Error;

/// Errors produced by the exact construction and verification routines.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("mismatched quadratic fields: sqrt({left}) vs sqrt({right})")]
    FieldMismatch { left: u64, right: u64 },

    #[error("division by zero")]
    DivisionByZero,

    #[error("invalid field discriminant {0}: must be a square-free integer >= 2")]
    InvalidField(u64),

    #[error("cannot parse {input:?}: {reason}")]
    Parse { input: String, reason: String },

    #[error("interval endpoint {0} lies outside [0, 1]")]
    EndpointOutOfRange(String),

    #[error("malformed interval [{start}, {end})")]
    MalformedInterval { start: String, end: String },

    #[error("rotation angle {0} is rational; the rotation would be periodic")]
    RationalAngle(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("orbit length {requested} exceeds the orbit cap {cap}")]
    OrbitCapExceeded { requested: u64, cap: u64 },

    #[error("piece cap {cap} exceeded")]
    PieceCapExceeded { cap: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("growth tail not certifiable: {0}")]
    TailNotCertifiable(String),

    #[error("audit failed: {0}")]
    AuditFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
