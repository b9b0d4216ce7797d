use thiserror::Error;

/// Errors raised by sketch construction, updates and queries.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no data")]
    NoData,
    #[error("empty input")]
    EmptyInput,
    #[error("input is not sorted ascending (index {0})")]
    Unsorted(usize),
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("probability {0} outside the open interval (0, 1)")]
    InvalidProbability(f64),
    #[error("invalid probability grid: {0}")]
    InvalidGrid(String),
    #[error("invalid summary: {0}")]
    InvalidSummary(String),
    #[error("invalid cdf anchors: {0}")]
    InvalidCdf(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("no data in slice")]
    EmptySlice,
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Decoding and encoding failures for [`crate::wire`] records.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("not a summary record")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated/overlong record: expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("corrupt record: {0}")]
    Corrupt(String),
    #[error("cannot encode summary: {0}")]
    Unencodable(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
