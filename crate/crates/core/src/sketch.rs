use crate::error::Result;
use crate::iq::iq_update;
use crate::summary::{DataBuffer, ProbabilityGrid, QuantileSummary};
use crate::variants::{ewma_update, BlockWindow, EwmaConfig};

/// Which update rule a sketch applies when its buffer flushes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Nominal,
    Ewma(EwmaConfig),
    Windowed(usize),
}

#[derive(Debug, Clone)]
enum State {
    Summary(QuantileSummary),
    Window(BlockWindow),
}

/// A single-writer streaming sketch: a buffer of `N` observations in front of
/// one of the estimators. State size depends only on `M`, `N` and, for the
/// windowed estimator, `K`.
#[derive(Debug, Clone)]
pub struct Sketch {
    grid: ProbabilityGrid,
    estimator: Estimator,
    buffer: DataBuffer,
    state: State,
    count: u64,
    flushes: u64,
}

impl Sketch {
    pub fn new(grid: ProbabilityGrid, buffer_len: usize, estimator: Estimator) -> Result<Self> {
        let buffer = DataBuffer::new(buffer_len)?;
        let state = Self::fresh_state(&grid, estimator)?;
        Ok(Self {
            grid,
            estimator,
            buffer,
            state,
            count: 0,
            flushes: 0,
        })
    }

    fn fresh_state(grid: &ProbabilityGrid, estimator: Estimator) -> Result<State> {
        Ok(match estimator {
            Estimator::Windowed(k) => State::Window(BlockWindow::new(grid.clone(), k)?),
            _ => State::Summary(QuantileSummary::empty(grid.clone())),
        })
    }

    pub fn grid(&self) -> &ProbabilityGrid {
        &self.grid
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    pub fn buffer_capacity(&self) -> usize {
        self.buffer.capacity()
    }

    /// Observations buffered but not yet absorbed.
    pub fn pending(&self) -> usize {
        self.buffer.len()
    }

    /// Total observations absorbed by flushes.
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn flushes(&self) -> u64 {
        self.flushes
    }

    /// Adds one observation, flushing when the buffer fills.
    pub fn push(&mut self, x: f64) -> Result<()> {
        self.buffer.push(x)?;
        if self.buffer.is_full() {
            self.flush()?;
        }
        Ok(())
    }

    pub fn extend<I: IntoIterator<Item = f64>>(&mut self, xs: I) -> Result<()> {
        xs.into_iter().try_for_each(|x| self.push(x))
    }

    /// Absorbs whatever is buffered, including a partial load. No-op when the
    /// buffer is empty.
    pub fn flush(&mut self) -> Result<()> {
        if self.buffer.is_empty() {
            return Ok(());
        }
        let d = self.buffer.drain_sorted();
        match (&mut self.state, self.estimator) {
            (State::Window(w), _) => w.push(&d)?,
            (State::Summary(s), Estimator::Ewma(cfg)) => *s = ewma_update(s, &d, cfg)?,
            (State::Summary(s), _) => *s = iq_update(s, &d)?,
        }
        self.count += d.len() as u64;
        self.flushes += 1;
        Ok(())
    }

    /// Current estimate; empty until the first flush.
    pub fn summary(&self) -> Result<QuantileSummary> {
        match &self.state {
            State::Summary(s) => Ok(s.clone()),
            State::Window(w) if w.is_empty() => Ok(QuantileSummary::empty(self.grid.clone())),
            State::Window(w) => w.estimate(),
        }
    }

    /// Drops all absorbed state and pending observations.
    pub fn reset(&mut self) -> Result<()> {
        self.buffer.drain_sorted();
        self.state = Self::fresh_state(&self.grid, self.estimator)?;
        self.count = 0;
        self.flushes = 0;
        Ok(())
    }
}
