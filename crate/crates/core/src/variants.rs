//! Smoothing variants that track the current distribution instead of the
//! whole history: an EWMA of CDFs and a moving window of block summaries.

use std::collections::VecDeque;

use crate::cdf::{check_sorted, ApproxCdf};
use crate::error::{Error, Result};
use crate::iq::{invert_at_grid, iq_update, summary_to_cdf, update_with, Weighting};
use crate::summary::{ProbabilityGrid, QuantileSummary};

pub const DEFAULT_EWMA_WEIGHT: f64 = 0.1;
pub const DEFAULT_WINDOW_BLOCKS: usize = 10;

/// Weight given to each new buffer in an EWMA update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwmaConfig {
    weight: f64,
}

impl EwmaConfig {
    pub fn new(weight: f64) -> Result<Self> {
        if weight > 0.0 && weight <= 1.0 {
            Ok(Self { weight })
        } else {
            Err(Error::InvalidConfig(format!("ewma weight {weight} outside (0, 1]")))
        }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

impl Default for EwmaConfig {
    fn default() -> Self {
        Self {
            weight: DEFAULT_EWMA_WEIGHT,
        }
    }
}

/// EWMA-of-CDF update: `(1 - w) F_prev + w F_buf`, inverted at the grid.
///
/// The count still accumulates raw observations for reporting; it does not
/// enter the weights. An empty prior falls back to the first-flush rule.
pub fn ewma_update(s: &QuantileSummary, d: &[f64], cfg: EwmaConfig) -> Result<QuantileSummary> {
    update_with(s, d, Weighting::Ewma(cfg.weight))
}

/// Ring of the last `K` per-block summaries.
#[derive(Debug, Clone)]
pub struct BlockWindow {
    grid: ProbabilityGrid,
    capacity: usize,
    blocks: VecDeque<QuantileSummary>,
    pushed: u64,
}

impl BlockWindow {
    pub fn new(grid: ProbabilityGrid, window_size: usize) -> Result<Self> {
        if window_size == 0 {
            return Err(Error::InvalidConfig("window size must be positive".into()));
        }
        Ok(Self {
            grid,
            capacity: window_size,
            blocks: VecDeque::with_capacity(window_size),
            pushed: 0,
        })
    }

    pub fn window_size(&self) -> usize {
        self.capacity
    }

    pub fn grid(&self) -> &ProbabilityGrid {
        &self.grid
    }

    /// Retained block summaries, oldest first.
    pub fn blocks(&self) -> impl ExactSizeIterator<Item = &QuantileSummary> {
        self.blocks.iter()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Blocks pushed over the window's lifetime, including evicted ones.
    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    /// Summarizes one sorted block and appends it, evicting the oldest block
    /// when more than `K` would be retained.
    pub fn push(&mut self, d: &[f64]) -> Result<()> {
        check_sorted(d)?;
        let block = iq_update(&QuantileSummary::empty(self.grid.clone()), d)?;
        if self.blocks.len() == self.capacity {
            self.blocks.pop_front();
        }
        self.blocks.push_back(block);
        self.pushed += 1;
        Ok(())
    }

    /// Count-weighted pooled estimate over the retained blocks.
    pub fn estimate(&self) -> Result<QuantileSummary> {
        if self.blocks.is_empty() {
            return Err(Error::NoData);
        }
        let pooled = pool_summaries(self.blocks.iter(), &self.grid)?;
        Ok(pooled.with_epoch(self.pushed))
    }
}

/// Functional form of [`BlockWindow::push`].
pub fn window_push(mut wdw: BlockWindow, d: &[f64]) -> Result<BlockWindow> {
    wdw.push(d)?;
    Ok(wdw)
}

pub fn window_estimate(wdw: &BlockWindow) -> Result<QuantileSummary> {
    wdw.estimate()
}

/// Pools summaries by count-weighted CDF mixture and inverts at `grid`.
/// The resulting epoch is the largest member epoch.
pub(crate) fn pool_summaries<'a, I>(members: I, grid: &ProbabilityGrid) -> Result<QuantileSummary>
where
    I: IntoIterator<Item = &'a QuantileSummary>,
{
    let members: Vec<&QuantileSummary> = members.into_iter().collect();
    if members.is_empty() {
        return Err(Error::NoData);
    }
    let cdfs = members
        .iter()
        .map(|s| summary_to_cdf(s))
        .collect::<Result<Vec<_>>>()?;
    let weighted: Vec<(f64, &ApproxCdf)> = members
        .iter()
        .zip(&cdfs)
        .map(|(s, c)| (s.count() as f64, c))
        .collect();
    let pooled = ApproxCdf::mixture(&weighted)?;

    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut count = 0u64;
    let mut epoch = 0u64;
    for s in &members {
        // Members are populated: summary_to_cdf above rejected empty ones.
        min = min.min(s.min().unwrap_or(min));
        max = max.max(s.max().unwrap_or(max));
        count += s.count();
        epoch = epoch.max(s.epoch());
    }
    let values = invert_at_grid(&pooled, grid, min, max);
    QuantileSummary::from_parts(grid.clone(), values, count, min, max, epoch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> ProbabilityGrid {
        ProbabilityGrid::new(vec![0.25, 0.5, 0.75]).unwrap()
    }

    fn block(start: f64) -> Vec<f64> {
        (0..8).map(|i| start + i as f64).collect()
    }

    #[test]
    fn ewma_weight_validation() {
        assert!(EwmaConfig::new(0.0).is_err());
        assert!(EwmaConfig::new(1.5).is_err());
        assert!(EwmaConfig::new(f64::NAN).is_err());
        assert!(EwmaConfig::new(1.0).is_ok());
        assert_eq!(EwmaConfig::default().weight(), 0.1);
    }

    #[test]
    fn ewma_full_weight_forgets_prior() {
        let mut s = QuantileSummary::empty(grid());
        s = iq_update(&s, &block(-100.0)).unwrap();
        let d = block(10.0);
        let out = ewma_update(&s, &d, EwmaConfig::new(1.0).unwrap()).unwrap();
        let fresh = iq_update(&QuantileSummary::empty(grid()), &d).unwrap();
        assert_eq!(out.values(), fresh.values());
        assert_eq!(out.count(), 16);
        assert_eq!(out.min(), Some(-100.0));
    }

    #[test]
    fn ewma_empty_prior_is_first_flush() {
        let d = block(0.0);
        let out = ewma_update(&QuantileSummary::empty(grid()), &d, EwmaConfig::default()).unwrap();
        let fresh = iq_update(&QuantileSummary::empty(grid()), &d).unwrap();
        assert_eq!(out, fresh);
    }

    #[test]
    fn window_evicts_oldest() {
        let mut w = BlockWindow::new(grid(), 3).unwrap();
        for k in 0..5 {
            w.push(&block(k as f64 * 100.0)).unwrap();
        }
        assert_eq!(w.len(), 3);
        assert_eq!(w.pushed(), 5);
        let mins: Vec<_> = w.blocks().map(|b| b.min().unwrap()).collect();
        assert_eq!(mins, vec![200.0, 300.0, 400.0]);
    }

    #[test]
    fn single_block_window_matches_block() {
        let w = window_push(BlockWindow::new(grid(), 4).unwrap(), &block(1.0)).unwrap();
        let est = window_estimate(&w).unwrap();
        let fresh = iq_update(&QuantileSummary::empty(grid()), &block(1.0)).unwrap();
        assert_eq!(est.values(), fresh.values());
        assert_eq!(est.count(), 8);
    }

    #[test]
    fn identical_blocks_pool_to_same_values() {
        let mut w = BlockWindow::new(grid(), 5).unwrap();
        for _ in 0..5 {
            w.push(&block(3.0)).unwrap();
        }
        let est = w.estimate().unwrap();
        let fresh = iq_update(&QuantileSummary::empty(grid()), &block(3.0)).unwrap();
        for (a, b) in est.values().iter().zip(fresh.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(est.count(), 40);
    }

    #[test]
    fn window_errors() {
        assert!(BlockWindow::new(grid(), 0).is_err());
        let mut w = BlockWindow::new(grid(), 2).unwrap();
        assert_eq!(w.estimate().unwrap_err(), Error::NoData);
        assert_eq!(w.push(&[3.0, 1.0]), Err(Error::Unsorted(1)));
        assert_eq!(w.push(&[]), Err(Error::EmptyInput));
        assert!(w.is_empty());
    }
}
