use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidSpec(String),
    #[error("beta_c is infinite for d = 1 and alpha = {alpha} >= 1; criticality experiments need alpha < 1")]
    InfiniteCriticalPoint { alpha: f64 },
    #[error("box has {pairs} vertex pairs, more than the cap of {cap}")]
    PairCapExceeded { pairs: u64, cap: u64 },
    #[error("box has {edges} candidate edges, enumeration cap is {cap}")]
    EdgeCapExceeded { edges: usize, cap: usize },
    #[error("edge endpoint {index} lies outside the box of {len} vertices")]
    EndpointOutsideBox { index: u64, len: u64 },
    #[error("sub-box radius {k} is invalid for box radius {n}")]
    RadiusOutOfRange { k: u32, n: u32 },
    #[error("truncation error bound {bound:e} exceeds tolerance {tolerance:e}")]
    TruncationTolerance { bound: f64, tolerance: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid bracket: {0}")]
    InvalidBracket(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}
