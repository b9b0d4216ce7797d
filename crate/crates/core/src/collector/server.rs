//! Server-side record store, slice filters and drill-down pooling.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use crate::cdf::ApproxCdf;
use crate::error::{Error, Result, WireError};
use crate::iq::{invert_at_grid, summary_to_cdf};
use crate::summary::{ProbabilityGrid, QuantileSummary};
use crate::variants::{pool_summaries, EwmaConfig};
use crate::wire::{decode_record, RecordFlags};

pub type Labels = BTreeMap<String, String>;

/// Count-weighted CDF pooling of populated summaries, inverted at `grid`.
pub fn merge_summaries(members: &[QuantileSummary], grid: &ProbabilityGrid) -> Result<QuantileSummary> {
    pool_summaries(members, grid)
}

/// Label-equality filter; an empty filter matches every agent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SliceFilter(pub Labels);

impl SliceFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: &str) -> Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    pub fn matches(&self, labels: &Labels) -> bool {
        self.0.iter().all(|(k, v)| labels.get(k) == Some(v))
    }
}

impl fmt::Display for SliceFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("*");
        }
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// Parses `key=value,key=value`; `*` or the empty string matches all.
impl FromStr for SliceFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "*" {
            return Ok(Self::all());
        }
        let mut labels = Labels::new();
        for part in s.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("slice term `{part}` lacks `=`")))?;
            labels.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self(labels))
    }
}

/// How the server combines the member summaries of a drill.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ServerEstimator {
    /// Count-weighted pooling of all members.
    Pooled,
    /// Per-epoch pooled CDFs smoothed across epochs, oldest first.
    /// Needs reset-mode records.
    Ewma(EwmaConfig),
    /// Pooling over the last `K` epochs only. Needs reset-mode records.
    Window(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrillQuery {
    pub estimator: ServerEstimator,
    /// Epoch interval to consider; `None` means all stored epochs.
    pub epochs: Option<RangeInclusive<u64>>,
}

impl Default for DrillQuery {
    fn default() -> Self {
        Self {
            estimator: ServerEstimator::Pooled,
            epochs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub agent_id: u64,
    pub summary: QuantileSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledView {
    pub filter: SliceFilter,
    pub members: Vec<Member>,
    pub pooled: QuantileSummary,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub accepted: u64,
    pub duplicates: u64,
    pub rejected: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestOutcome {
    Stored,
    Replaced,
    Rejected(WireError),
}

#[derive(Debug, Clone, PartialEq)]
struct Stored {
    flags: RecordFlags,
    summary: QuantileSummary,
}

/// Record store keyed by `(agent_id, epoch)`.
#[derive(Debug, Clone)]
pub struct Server {
    grid: ProbabilityGrid,
    labels: HashMap<u64, Labels>,
    records: BTreeMap<(u64, u64), Stored>,
    stats: IngestStats,
}

impl Server {
    /// `grid` is the level set every pooled view is reported on.
    pub fn new(grid: ProbabilityGrid) -> Self {
        Self {
            grid,
            labels: HashMap::new(),
            records: BTreeMap::new(),
            stats: IngestStats::default(),
        }
    }

    pub fn grid(&self) -> &ProbabilityGrid {
        &self.grid
    }

    /// Associates slice labels with an agent. Agents that were never
    /// registered only match the empty filter.
    pub fn register_agent(&mut self, agent_id: u64, labels: Labels) {
        self.labels.insert(agent_id, labels);
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Agents with at least one stored record.
    pub fn agents(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.records.keys().map(|(a, _)| *a).collect();
        ids.dedup();
        ids
    }

    pub fn record(&self, agent_id: u64, epoch: u64) -> Option<&QuantileSummary> {
        self.records.get(&(agent_id, epoch)).map(|s| &s.summary)
    }

    /// Decodes and stores one record. Never fails: bad records are counted
    /// and skipped, and a repeated `(agent_id, epoch)` replaces the old copy.
    pub fn ingest(&mut self, bytes: &[u8]) -> IngestOutcome {
        let rec = match decode_record(bytes) {
            Ok(rec) => rec,
            Err(e) => {
                self.stats.rejected += 1;
                return IngestOutcome::Rejected(e);
            }
        };
        let key = (rec.agent_id, rec.summary.epoch());
        let stored = Stored {
            flags: rec.flags,
            summary: rec.summary,
        };
        if self.records.insert(key, stored).is_some() {
            self.stats.duplicates += 1;
            IngestOutcome::Replaced
        } else {
            self.stats.accepted += 1;
            IngestOutcome::Stored
        }
    }

    fn agent_matches(&self, agent_id: u64, filter: &SliceFilter) -> bool {
        match self.labels.get(&agent_id) {
            Some(labels) => filter.matches(labels),
            None => filter.0.is_empty(),
        }
    }

    /// Pools the summaries of all agents matching `filter`.
    ///
    /// Cumulative-mode agents contribute their latest epoch in range;
    /// reset-mode agents contribute every epoch in range.
    pub fn drill(&self, filter: &SliceFilter, query: &DrillQuery) -> Result<PooledView> {
        let in_range = |epoch: u64| query.epochs.as_ref().is_none_or(|r| r.contains(&epoch));

        let mut members: Vec<(Member, bool)> = Vec::new();
        let mut latest: BTreeMap<u64, &Stored> = BTreeMap::new();
        for (&(agent_id, epoch), stored) in &self.records {
            if !in_range(epoch) || !self.agent_matches(agent_id, filter) {
                continue;
            }
            if stored.flags.is_reset() {
                members.push((
                    Member {
                        agent_id,
                        summary: stored.summary.clone(),
                    },
                    true,
                ));
            } else {
                // BTreeMap order is by epoch within an agent, so the last wins.
                latest.insert(agent_id, stored);
            }
        }
        let has_cumulative = !latest.is_empty();
        members.extend(latest.into_iter().map(|(agent_id, s)| {
            (
                Member {
                    agent_id,
                    summary: s.summary.clone(),
                },
                false,
            )
        }));
        if members.is_empty() {
            return Err(Error::EmptySlice);
        }
        members.sort_by_key(|(m, _)| (m.summary.epoch(), m.agent_id));

        let pooled = match query.estimator {
            ServerEstimator::Pooled => {
                pool_summaries(members.iter().map(|(m, _)| &m.summary), &self.grid)?
            }
            ServerEstimator::Ewma(_) | ServerEstimator::Window(_) if has_cumulative => {
                return Err(Error::InvalidConfig(
                    "ewma and window drills need reset-mode records".into(),
                ));
            }
            ServerEstimator::Window(k) => {
                if k == 0 {
                    return Err(Error::InvalidConfig("window size must be positive".into()));
                }
                let epochs = distinct_epochs(&members);
                let cutoff = epochs[epochs.len().saturating_sub(k)];
                members.retain(|(m, _)| m.summary.epoch() >= cutoff);
                pool_summaries(members.iter().map(|(m, _)| &m.summary), &self.grid)?
            }
            ServerEstimator::Ewma(cfg) => self.ewma_across_epochs(&members, cfg)?,
        };

        Ok(PooledView {
            filter: filter.clone(),
            members: members.into_iter().map(|(m, _)| m).collect(),
            pooled,
        })
    }

    fn ewma_across_epochs(&self, members: &[(Member, bool)], cfg: EwmaConfig) -> Result<QuantileSummary> {
        let w = cfg.weight();
        let mut smoothed: Option<ApproxCdf> = None;
        for epoch in distinct_epochs(members) {
            let group: Vec<&QuantileSummary> = members
                .iter()
                .map(|(m, _)| &m.summary)
                .filter(|s| s.epoch() == epoch)
                .collect();
            let cdfs = group.iter().map(|s| summary_to_cdf(s)).collect::<Result<Vec<_>>>()?;
            let weighted: Vec<_> = group.iter().zip(&cdfs).map(|(s, c)| (s.count() as f64, c)).collect();
            let epoch_cdf = ApproxCdf::mixture(&weighted)?;
            smoothed = Some(match smoothed {
                None => epoch_cdf,
                Some(prev) => ApproxCdf::mixture(&[(1.0 - w, &prev), (w, &epoch_cdf)])?,
            });
        }
        let cdf = smoothed.ok_or(Error::EmptySlice)?;
        let all: Vec<&QuantileSummary> = members.iter().map(|(m, _)| &m.summary).collect();
        let min = all.iter().filter_map(|s| s.min()).fold(f64::INFINITY, f64::min);
        let max = all.iter().filter_map(|s| s.max()).fold(f64::NEG_INFINITY, f64::max);
        let count = all.iter().map(|s| s.count()).sum();
        let epoch = all.iter().map(|s| s.epoch()).max().unwrap_or(0);
        let values = invert_at_grid(&cdf, &self.grid, min, max);
        QuantileSummary::from_parts(self.grid.clone(), values, count, min, max, epoch)
    }
}

fn distinct_epochs(members: &[(Member, bool)]) -> Vec<u64> {
    let mut epochs: Vec<u64> = members.iter().map(|(m, _)| m.summary.epoch()).collect();
    epochs.sort_unstable();
    epochs.dedup();
    epochs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iq::iq_update;
    use crate::wire::encode_record;

    fn grid() -> ProbabilityGrid {
        ProbabilityGrid::new(vec![0.25, 0.5, 0.75]).unwrap()
    }

    fn summary(lo: f64, epoch: u64) -> QuantileSummary {
        let d: Vec<f64> = (0..10).map(|i| lo + i as f64).collect();
        iq_update(&QuantileSummary::empty(grid()), &d).unwrap().with_epoch(epoch)
    }

    fn record(agent: u64, s: &QuantileSummary, flags: RecordFlags) -> Vec<u8> {
        encode_record(s, agent, flags).unwrap()
    }

    #[test]
    fn filter_parsing_and_matching() {
        let f: SliceFilter = "region=east, app=web".parse().unwrap();
        let mut labels = Labels::new();
        labels.insert("region".into(), "east".into());
        assert!(!f.matches(&labels));
        labels.insert("app".into(), "web".into());
        assert!(f.matches(&labels));
        assert_eq!("*".parse::<SliceFilter>().unwrap(), SliceFilter::all());
        assert!("region".parse::<SliceFilter>().is_err());
        assert_eq!(f.to_string(), "app=web,region=east");
    }

    #[test]
    fn duplicates_replace() {
        let mut srv = Server::new(grid());
        let bytes = record(1, &summary(0.0, 1), RecordFlags::cumulative());
        assert_eq!(srv.ingest(&bytes), IngestOutcome::Stored);
        assert_eq!(srv.ingest(&bytes), IngestOutcome::Replaced);
        assert_eq!(srv.len(), 1);
        assert_eq!(srv.stats().duplicates, 1);
    }

    #[test]
    fn corrupt_records_are_tallied() {
        let mut srv = Server::new(grid());
        assert!(matches!(srv.ingest(b"garbage"), IngestOutcome::Rejected(_)));
        assert!(srv.is_empty());
        assert_eq!(srv.stats().rejected, 1);
    }

    #[test]
    fn bookkeeping_three_agents_five_epochs() {
        let mut srv = Server::new(grid());
        for agent in 0..3 {
            for epoch in 1..=5 {
                srv.ingest(&record(agent, &summary(0.0, epoch), RecordFlags::cumulative()));
            }
        }
        assert_eq!(srv.len(), 15);
        assert_eq!(srv.agents(), vec![0, 1, 2]);
        assert!(srv.record(2, 5).is_some());
    }

    #[test]
    fn cumulative_drill_uses_latest_epoch() {
        let mut srv = Server::new(grid());
        srv.ingest(&record(1, &summary(0.0, 1), RecordFlags::cumulative()));
        srv.ingest(&record(1, &summary(100.0, 2), RecordFlags::cumulative()));
        let view = srv.drill(&SliceFilter::all(), &DrillQuery::default()).unwrap();
        assert_eq!(view.members.len(), 1);
        assert_eq!(view.pooled.values(), summary(100.0, 2).values());

        let early = DrillQuery { epochs: Some(1..=1), ..DrillQuery::default() };
        let view = srv.drill(&SliceFilter::all(), &early).unwrap();
        assert_eq!(view.pooled.values(), summary(0.0, 1).values());
    }

    #[test]
    fn reset_drill_pools_interval() {
        let mut srv = Server::new(grid());
        for epoch in 1..=4 {
            srv.ingest(&record(1, &summary(10.0 * epoch as f64, epoch), RecordFlags::reset()));
        }
        let q = DrillQuery { epochs: Some(2..=3), ..DrillQuery::default() };
        let view = srv.drill(&SliceFilter::all(), &q).unwrap();
        assert_eq!(view.members.len(), 2);
        assert_eq!(view.pooled.count(), 20);

        let last = DrillQuery { estimator: ServerEstimator::Window(1), epochs: None };
        let view = srv.drill(&SliceFilter::all(), &last).unwrap();
        assert_eq!(view.pooled.values(), summary(40.0, 4).values());

        let ewma = DrillQuery {
            estimator: ServerEstimator::Ewma(EwmaConfig::new(1.0).unwrap()),
            epochs: None,
        };
        let view = srv.drill(&SliceFilter::all(), &ewma).unwrap();
        assert_eq!(view.pooled.values(), summary(40.0, 4).values());
        assert_eq!(view.pooled.count(), 40);
    }

    #[test]
    fn smoothing_drills_reject_cumulative_members() {
        let mut srv = Server::new(grid());
        srv.ingest(&record(1, &summary(0.0, 1), RecordFlags::cumulative()));
        let q = DrillQuery { estimator: ServerEstimator::Window(2), epochs: None };
        assert!(matches!(srv.drill(&SliceFilter::all(), &q), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn unmatched_slice_is_an_error() {
        let mut srv = Server::new(grid());
        srv.register_agent(1, Labels::from([("region".into(), "east".into())]));
        srv.ingest(&record(1, &summary(0.0, 1), RecordFlags::cumulative()));
        let west = SliceFilter::all().with("region", "west");
        assert_eq!(srv.drill(&west, &DrillQuery::default()), Err(Error::EmptySlice));
        assert_eq!(Error::EmptySlice.to_string(), "no data in slice");
        let east = SliceFilter::all().with("region", "east");
        assert!(srv.drill(&east, &DrillQuery::default()).is_ok());
    }

    #[test]
    fn merge_identities() {
        let s = summary(0.0, 3);
        let one = merge_summaries(std::slice::from_ref(&s), &grid()).unwrap();
        assert_eq!(one, s);
        let two = merge_summaries(&[s.clone(), s.clone()], &grid()).unwrap();
        assert_eq!(two.values(), s.values());
        assert_eq!(two.count(), 2 * s.count());
        assert_eq!(merge_summaries(&[], &grid()), Err(Error::NoData));
    }
}
