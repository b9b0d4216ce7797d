//! Incremental quantile monitoring.
//!
//! Agents keep a small quantile summary of a numeric stream, refreshing it
//! every time a fixed-size buffer of raw observations fills. Summaries travel
//! to a collector as fixed-length records, where they are pooled by slice.
//! The [`eval`] module measures accuracy against exact retained data and
//! provides a Kolmogorov-Smirnov change trigger.

pub mod cdf;
pub mod collector;
pub mod error;
pub mod eval;
pub mod iq;
pub mod sketch;
pub mod summary;
pub mod variants;
pub mod wire;

pub use cdf::{empirical_cdf, invert_cdf, Anchor, ApproxCdf};
pub use error::{Error, Result, WireError};
pub use iq::{iq_update, query_cdf, query_quantile, summary_to_cdf};
pub use sketch::{Estimator, Sketch};
pub use summary::{DataBuffer, ProbabilityGrid, QuantileSummary};
pub use variants::{ewma_update, window_estimate, window_push, BlockWindow, EwmaConfig};
pub use wire::{decode_record, encode_record, RecordFlags, SummaryRecord};
