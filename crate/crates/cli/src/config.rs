//! Experiment configuration: a TOML file overlaid by command-line flags and
//! the `IQMON_SEED` environment variable.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use iqmon::collector::{AgentMode, AgentSpec, Distribution, Labels, ServerEstimator, SimulationConfig, StreamSpec};
use iqmon::eval::TriggerConfig;
use iqmon::variants::{DEFAULT_EWMA_WEIGHT, DEFAULT_WINDOW_BLOCKS};
use iqmon::{Estimator, EwmaConfig, ProbabilityGrid};
use serde::Deserialize;

use crate::error::CliError;

pub const SEED_ENV: &str = "IQMON_SEED";
pub const DEFAULT_MEMORY_CAP: u64 = 10_000_000;
pub const DEFAULT_BENCH_SIZES: [usize; 3] = [100_000, 200_000, 400_000];

/// Odd 64-bit constant (golden ratio) spreading agent ids across seeds.
const AGENT_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Nominal,
    Ewma,
    Window,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Nominal => "nominal",
            Self::Ewma => "ewma",
            Self::Window => "window",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentModeKey {
    #[default]
    Cumulative,
    Reset,
}

/// The file layout. Every key is optional here; requirements are checked
/// when the experiment is resolved so the message can name the key.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub buffer: Option<usize>,
    pub grid: Option<Vec<f64>>,
    pub mode: Option<Mode>,
    pub w: Option<f64>,
    pub k: Option<usize>,
    pub agents: Option<u64>,
    pub intervals: Option<u64>,
    pub alpha: Option<f64>,
    pub agent_mode: Option<AgentModeKey>,
    pub stream: Option<String>,
    pub shift_at: Option<u64>,
    pub shift_stream: Option<String>,
    /// Label key to comma-separated values, assigned to agents round-robin.
    #[serde(default)]
    pub slice: BTreeMap<String, String>,
    pub out: Option<PathBuf>,
    pub memory_cap: Option<u64>,
    pub bench_sizes: Option<Vec<usize>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }
}

/// Flags shared by every subcommand; each one overrides the file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML experiment configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
    /// EWMA weight in (0, 1].
    #[arg(long, global = true, value_name = "FLOAT")]
    pub w: Option<f64>,
    /// Window length in blocks.
    #[arg(long, global = true, value_name = "INT")]
    pub k: Option<usize>,
    /// Comma-separated probability levels.
    #[arg(long, global = true, value_name = "p1,p2,...")]
    pub grid: Option<String>,
    /// Buffer length N.
    #[arg(long, global = true, value_name = "N")]
    pub buffer: Option<usize>,
    /// Trigger significance level.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub alpha: Option<f64>,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub seed: u64,
    pub buffer: usize,
    pub grid: ProbabilityGrid,
    pub mode: Mode,
    pub ewma: EwmaConfig,
    pub k: usize,
    pub agents: u64,
    pub intervals: Option<u64>,
    pub trigger: TriggerConfig,
    pub agent_mode: AgentMode,
    pub stream: Distribution,
    pub shift: Option<(u64, Distribution)>,
    pub slices: BTreeMap<String, Vec<String>>,
    pub out: PathBuf,
    pub memory_cap: u64,
    pub bench_sizes: Vec<usize>,
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing required key `{key}`"))
}

fn invalid(key: &str, e: impl fmt::Display) -> CliError {
    CliError::Config(format!("invalid `{key}`: {e}"))
}

fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| invalid("grid", format!("`{t}`: {e}"))))
        .collect()
}

impl Experiment {
    /// Precedence per key: flag, then `env_seed` (seed only), then file.
    pub fn resolve(file: FileConfig, flags: &Overrides, env_seed: Option<&str>) -> Result<Self, CliError> {
        let env_seed = env_seed
            .map(|s| s.trim().parse::<u64>().map_err(|e| invalid(SEED_ENV, e)))
            .transpose()?;
        let seed = flags.seed.or(env_seed).or(file.seed).ok_or_else(|| missing("seed"))?;
        let buffer = flags.buffer.or(file.buffer).ok_or_else(|| missing("buffer"))?;
        if buffer == 0 {
            return Err(invalid("buffer", "must be positive"));
        }

        let levels = match (&flags.grid, file.grid) {
            (Some(s), _) => Some(parse_grid(s)?),
            (None, g) => g,
        };
        let grid = match levels {
            Some(l) => ProbabilityGrid::new(l).map_err(|e| invalid("grid", e))?,
            None => ProbabilityGrid::default(),
        };

        let mode = flags.mode.or(file.mode).unwrap_or_default();
        let ewma = EwmaConfig::new(flags.w.or(file.w).unwrap_or(DEFAULT_EWMA_WEIGHT)).map_err(|e| invalid("w", e))?;
        let k = flags.k.or(file.k).unwrap_or(DEFAULT_WINDOW_BLOCKS);
        if k == 0 {
            return Err(invalid("k", "must be positive"));
        }
        let trigger = TriggerConfig::new(flags.alpha.or(file.alpha).unwrap_or(0.05)).map_err(|e| invalid("alpha", e))?;

        let agents = file.agents.unwrap_or(1);
        if agents == 0 {
            return Err(invalid("agents", "must be positive"));
        }
        let stream = file
            .stream
            .as_deref()
            .ok_or_else(|| missing("stream"))?
            .parse::<Distribution>()
            .map_err(|e| invalid("stream", e))?;
        let shift = match (file.shift_at, file.shift_stream) {
            (Some(at), Some(s)) => Some((at, s.parse::<Distribution>().map_err(|e| invalid("shift_stream", e))?)),
            (None, None) => None,
            (Some(_), None) => return Err(missing("shift_stream")),
            (None, Some(_)) => return Err(missing("shift_at")),
        };

        let mut slices = BTreeMap::new();
        for (key, values) in file.slice {
            let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
            if key.is_empty() || values.iter().any(|v| v.is_empty()) {
                return Err(invalid(&format!("slice.{key}"), "empty label key or value"));
            }
            slices.insert(key, values);
        }

        let bench_sizes = file.bench_sizes.unwrap_or_else(|| DEFAULT_BENCH_SIZES.to_vec());
        if bench_sizes.is_empty() || bench_sizes[0] == 0 || bench_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("bench_sizes", "expected a nonempty, strictly increasing list of positive sizes"));
        }

        Ok(Self {
            seed,
            buffer,
            grid,
            mode,
            ewma,
            k,
            agents,
            intervals: file.intervals,
            trigger,
            agent_mode: match file.agent_mode.unwrap_or_default() {
                AgentModeKey::Cumulative => AgentMode::Cumulative,
                AgentModeKey::Reset => AgentMode::ResetPerInterval,
            },
            stream,
            shift,
            slices,
            out: flags.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            memory_cap: file.memory_cap.unwrap_or(DEFAULT_MEMORY_CAP),
            bench_sizes,
        })
    }

    /// Loads `--config` (if any) and applies flags and the environment.
    pub fn from_cli(flags: &Overrides) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let env = std::env::var(SEED_ENV).ok();
        Self::resolve(file, flags, env.as_deref())
    }

    pub fn intervals(&self) -> Result<u64, CliError> {
        match self.intervals {
            Some(0) => Err(invalid("intervals", "must be positive")),
            Some(n) => Ok(n),
            None => Err(missing("intervals")),
        }
    }

    pub fn estimator(&self) -> Estimator {
        match self.mode {
            Mode::Nominal => Estimator::Nominal,
            Mode::Ewma => Estimator::Ewma(self.ewma),
            Mode::Window => Estimator::Windowed(self.k),
        }
    }

    /// Cumulative records already integrate history, so only reset-mode
    /// fleets are smoothed on the server.
    pub fn server_estimator(&self) -> ServerEstimator {
        match (self.agent_mode, self.mode) {
            (AgentMode::Cumulative, _) | (_, Mode::Nominal) => ServerEstimator::Pooled,
            (AgentMode::ResetPerInterval, Mode::Ewma) => ServerEstimator::Ewma(self.ewma),
            (AgentMode::ResetPerInterval, Mode::Window) => ServerEstimator::Window(self.k),
        }
    }

    pub fn agent_seed(&self, agent_id: u64) -> u64 {
        self.seed.wrapping_add(agent_id.wrapping_mul(AGENT_SEED_STRIDE))
    }

    pub fn stream_spec(&self, seed: u64) -> StreamSpec {
        let spec = StreamSpec::new(self.stream.clone(), seed);
        match &self.shift {
            Some((at, d)) => spec.with_shift(*at, d.clone()),
            None => spec,
        }
    }

    pub fn agent_labels(&self, agent_id: u64) -> Labels {
        self.slices
            .iter()
            .map(|(k, vs)| (k.clone(), vs[(agent_id % vs.len() as u64) as usize].clone()))
            .collect()
    }

    pub fn agent_specs(&self) -> Vec<AgentSpec> {
        (0..self.agents)
            .map(|id| AgentSpec {
                agent_id: id,
                labels: self.agent_labels(id),
                stream: self.stream_spec(self.agent_seed(id)),
                mode: self.agent_mode,
                estimator: self.estimator(),
            })
            .collect()
    }

    pub fn simulation(&self, retain: bool) -> Result<SimulationConfig, CliError> {
        Ok(SimulationConfig {
            grid: self.grid.clone(),
            buffer_len: self.buffer,
            intervals: self.intervals()?,
            retain,
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as ValueEnum>::from_str(s, true)
    }
}
