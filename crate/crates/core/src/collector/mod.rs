//! Simulated agents, the record-ingesting server and drill-down pooling.

pub mod generator;
pub mod server;
pub mod sim;

pub use generator::{Distribution, StreamGenerator, StreamSpec};
pub use server::{
    merge_summaries, DrillQuery, IngestOutcome, IngestStats, Labels, Member, PooledView,
    ServerEstimator, Server, SliceFilter,
};
pub use sim::{run_simulation, AgentMode, AgentSpec, AgentTrace, SimulationConfig, SimulationOutput};
