//! Error types shared across the crate.

/// Crate-wide error type.
///
/// Variants map onto the failure classes of the library: bad inputs
/// (`Domain`), mismatched vector/matrix dimensions (`Shape`), invalid
/// configurations rejected before any work starts (`Config`), dataset
/// format problems (`Data`), numerical blow-ups during training
/// (`Numeric`), simulator states that violate a physical bound
/// (`PhysicsViolation`), and internal cross-checks that failed
/// (`Inconsistency`), which indicate a bug rather than bad input.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("physics violation: {0}")]
    PhysicsViolation(String),
    #[error("internal consistency error: {0}")]
    Inconsistency(String),
    #[error("contract error: {0}")]
    Contract(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
