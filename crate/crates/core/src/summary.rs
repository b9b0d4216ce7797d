//! Summary state: the probability grid, the quantile summary an agent keeps
//! between flushes, and the fixed-capacity observation buffer.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Levels `0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99`.
pub const BASE_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

/// [`BASE_LEVELS`] extended with the deciles 0.1 and 0.9 (M = 9).
pub const DEFAULT_LEVELS: [f64; 9] = [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99];

/// Strictly increasing probability levels in the open interval (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityGrid(Arc<[f64]>);

impl ProbabilityGrid {
    pub fn new(levels: impl Into<Vec<f64>>) -> Result<Self> {
        let levels: Vec<f64> = levels.into();
        if levels.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one level".into()));
        }
        if levels.len() > u16::MAX as usize {
            return Err(Error::InvalidGrid(format!("{} levels exceed 65535", levels.len())));
        }
        for (i, &p) in levels.iter().enumerate() {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidGrid(format!("level {p} outside (0, 1)")));
            }
            if i > 0 && p <= levels[i - 1] {
                return Err(Error::InvalidGrid(format!(
                    "levels not strictly increasing at {p}"
                )));
            }
        }
        Ok(Self(levels.into()))
    }

    pub fn levels(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for ProbabilityGrid {
    fn default() -> Self {
        Self(DEFAULT_LEVELS.as_slice().into())
    }
}

impl TryFrom<Vec<f64>> for ProbabilityGrid {
    type Error = Error;

    fn try_from(levels: Vec<f64>) -> Result<Self> {
        Self::new(levels)
    }
}

impl From<ProbabilityGrid> for Vec<f64> {
    fn from(grid: ProbabilityGrid) -> Self {
        grid.0.to_vec()
    }
}

/// Quantile estimates at a fixed grid plus the count and range of the data
/// absorbed so far. An empty summary (count 0) has no values.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSummary {
    grid: ProbabilityGrid,
    values: Vec<f64>,
    count: u64,
    min: f64,
    max: f64,
    epoch: u64,
}

impl QuantileSummary {
    pub fn empty(grid: ProbabilityGrid) -> Self {
        Self {
            grid,
            values: Vec::new(),
            count: 0,
            min: 0.0,
            max: 0.0,
            epoch: 0,
        }
    }

    /// Assembles a populated summary, checking every invariant.
    pub fn from_parts(
        grid: ProbabilityGrid,
        values: Vec<f64>,
        count: u64,
        min: f64,
        max: f64,
        epoch: u64,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidSummary(msg));
        if count == 0 {
            return bad("populated summary needs count > 0".into());
        }
        if values.len() != grid.len() {
            return bad(format!("{} values for {} levels", values.len(), grid.len()));
        }
        for &v in values.iter().chain([&min, &max]) {
            if !v.is_finite() {
                return Err(Error::NonFinite(v));
            }
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return bad("values decrease".into());
        }
        if min > values[0] || values[values.len() - 1] > max {
            return bad(format!("values not within [{min}, {max}]"));
        }
        Ok(Self {
            grid,
            values,
            count,
            min,
            max,
            epoch,
        })
    }

    pub fn grid(&self) -> &ProbabilityGrid {
        &self.grid
    }

    /// Quantile estimates, one per grid level; empty when `count() == 0`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn min(&self) -> Option<f64> {
        (!self.is_empty()).then_some(self.min)
    }

    pub fn max(&self) -> Option<f64> {
        (!self.is_empty()).then_some(self.max)
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn with_epoch(mut self, epoch: u64) -> Self {
        self.epoch = epoch;
        self
    }

    /// Iterates `(p, value)` pairs.
    pub fn levels(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.levels().iter().copied().zip(self.values.iter().copied())
    }
}

/// Fixed-capacity staging buffer of raw observations.
#[derive(Debug, Clone)]
pub struct DataBuffer {
    capacity: usize,
    items: Vec<f64>,
}

impl DataBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("buffer capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.items.len() == self.capacity
    }

    /// Appends an observation. Fails on non-finite input or a full buffer.
    pub fn push(&mut self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFinite(x));
        }
        if self.is_full() {
            return Err(Error::InvalidConfig(format!(
                "buffer full at capacity {}",
                self.capacity
            )));
        }
        self.items.push(x);
        Ok(())
    }

    /// Empties the buffer, returning its contents sorted ascending.
    pub fn drain_sorted(&mut self) -> Vec<f64> {
        let mut out = std::mem::replace(&mut self.items, Vec::with_capacity(self.capacity));
        out.sort_unstable_by(f64::total_cmp);
        out
    }
}
