//! Deterministic multi-agent simulation: every agent fills one buffer per
//! interval and emits one record; the server ingests them in interval order.

use std::collections::HashSet;

use rayon::prelude::*;

use super::generator::StreamSpec;
use super::server::{Labels, Server};
use crate::error::{Error, Result};
use crate::sketch::{Estimator, Sketch};
use crate::summary::ProbabilityGrid;
use crate::wire::{encode_record, RecordFlags};

/// Whether an agent keeps accumulating or starts over every interval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum AgentMode {
    #[default]
    Cumulative,
    ResetPerInterval,
}

impl AgentMode {
    pub fn flags(self) -> RecordFlags {
        match self {
            Self::Cumulative => RecordFlags::cumulative(),
            Self::ResetPerInterval => RecordFlags::reset(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub agent_id: u64,
    pub labels: Labels,
    pub stream: StreamSpec,
    pub mode: AgentMode,
    pub estimator: Estimator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    /// Grid used by agents and by the server.
    pub grid: ProbabilityGrid,
    /// Buffer length `N`; also the number of observations per interval.
    pub buffer_len: usize,
    pub intervals: u64,
    /// Keep every raw observation for oracle evaluation.
    pub retain: bool,
}

/// Raw observations of one agent, `buffer_len` per interval in order.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrace {
    pub agent_id: u64,
    pub observations: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub server: Server,
    /// Concatenated records, interval-major then in agent-spec order.
    pub log: Vec<u8>,
    /// Present when [`SimulationConfig::retain`] is set.
    pub traces: Vec<AgentTrace>,
}

fn validate(specs: &[AgentSpec], cfg: &SimulationConfig) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::InvalidConfig("simulation needs at least one agent".into()));
    }
    if cfg.buffer_len == 0 {
        return Err(Error::InvalidConfig("buffer length must be positive".into()));
    }
    let mut seen = HashSet::new();
    for spec in specs {
        if !seen.insert(spec.agent_id) {
            return Err(Error::InvalidConfig(format!("duplicate agent id {}", spec.agent_id)));
        }
        spec.stream.validate()?;
        if let Estimator::Windowed(0) = spec.estimator {
            return Err(Error::InvalidConfig("window size must be positive".into()));
        }
    }
    Ok(())
}

struct AgentRun {
    records: Vec<Vec<u8>>,
    observations: Vec<f64>,
}

fn run_agent(spec: &AgentSpec, cfg: &SimulationConfig) -> Result<AgentRun> {
    let mut generator = spec.stream.generator()?;
    let mut sketch = Sketch::new(cfg.grid.clone(), cfg.buffer_len, spec.estimator)?;
    let flags = spec.mode.flags();
    let mut records = Vec::with_capacity(cfg.intervals as usize);
    let mut observations = Vec::new();
    let mut load = Vec::with_capacity(cfg.buffer_len);
    for interval in 0..cfg.intervals {
        if spec.mode == AgentMode::ResetPerInterval {
            sketch.reset()?;
        }
        load.clear();
        generator.fill(interval, &mut load, cfg.buffer_len);
        sketch.extend(load.iter().copied())?;
        if cfg.retain {
            observations.extend_from_slice(&load);
        }
        let summary = sketch.summary()?.with_epoch(interval + 1);
        records.push(encode_record(&summary, spec.agent_id, flags)?);
    }
    Ok(AgentRun {
        records,
        observations,
    })
}

/// Runs `cfg.intervals` intervals for every agent. Agents run in parallel;
/// the log and server state are identical for identical inputs.
pub fn run_simulation(specs: &[AgentSpec], cfg: &SimulationConfig) -> Result<SimulationOutput> {
    validate(specs, cfg)?;
    let runs = specs
        .par_iter()
        .map(|spec| run_agent(spec, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut server = Server::new(cfg.grid.clone());
    for spec in specs {
        server.register_agent(spec.agent_id, spec.labels.clone());
    }
    let mut log = Vec::new();
    for interval in 0..cfg.intervals as usize {
        for run in &runs {
            let rec = &run.records[interval];
            server.ingest(rec);
            log.extend_from_slice(rec);
        }
    }
    let traces = if cfg.retain {
        specs
            .iter()
            .zip(runs)
            .map(|(spec, run)| AgentTrace {
                agent_id: spec.agent_id,
                observations: run.observations,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(SimulationOutput {
        server,
        log,
        traces,
    })
}
