//! Accuracy against an exact retained-data oracle, and the change trigger.
//!
//! Rank error measures how far the realized rank `q` of an estimate sits from
//! its target level `p`. The logit error `|logit p - logit q|` stretches the
//! same discrepancy near 0 and 1, where tail monitoring needs resolution.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cdf::{check_sorted, empirical_cdf, ApproxCdf};
use crate::error::{Error, Result};
use crate::iq::summary_to_cdf;
use crate::summary::QuantileSummary;

/// `ln(p / (1 - p))`.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn logit_error(p: f64, q: f64) -> f64 {
    (logit(p) - logit(q)).abs()
}

/// Exact empirical CDF of a retained reference sample.
#[derive(Debug, Clone)]
pub struct Oracle {
    cdf: ApproxCdf,
    size: usize,
}

impl Oracle {
    /// `reference` must be sorted ascending and nonempty.
    pub fn new(reference: &[f64]) -> Result<Self> {
        check_sorted(reference)?;
        Ok(Self {
            cdf: empirical_cdf(reference)?,
            size: reference.len(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Hazen-interpolated rank of `x`, clamped to `[1/(2T), 1 - 1/(2T)]`.
    pub fn realized_rank(&self, x: f64) -> f64 {
        let half_step = 0.5 / self.size as f64;
        self.cdf.eval(x).clamp(half_step, 1.0 - half_step)
    }
}

pub fn realized_rank(x: f64, reference: &[f64]) -> Result<f64> {
    Ok(Oracle::new(reference)?.realized_rank(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAccuracy {
    pub p: f64,
    pub estimate: f64,
    pub q: f64,
    pub rank_error: f64,
    pub logit_error: f64,
}

impl LevelAccuracy {
    pub fn new(p: f64, estimate: f64, q: f64) -> Self {
        Self {
            p,
            estimate,
            q,
            rank_error: (p - q).abs(),
            logit_error: logit_error(p, q),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub levels: Vec<LevelAccuracy>,
    pub eps_max: f64,
    pub logit_max: f64,
}

impl AccuracyReport {
    pub fn from_levels(levels: Vec<LevelAccuracy>) -> Self {
        let eps_max = levels.iter().map(|l| l.rank_error).fold(0.0, f64::max);
        let logit_max = levels.iter().map(|l| l.logit_error).fold(0.0, f64::max);
        Self {
            levels,
            eps_max,
            logit_max,
        }
    }

    /// Writes one row per level with columns
    /// `p,estimate,q,rank_error,logit_error`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p", "estimate", "q", "rank_error", "logit_error"])
            .map_err(io_error)?;
        for l in &self.levels {
            // Display prints the shortest string that parses back to the same f64.
            let row = [l.p, l.estimate, l.q, l.rank_error, l.logit_error].map(|x| x.to_string());
            w.write_record(&row).map_err(io_error)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let levels = r
            .deserialize()
            .collect::<std::result::Result<Vec<LevelAccuracy>, _>>()
            .map_err(io_error)?;
        Ok(Self::from_levels(levels))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Io(e.to_string()))
    }
}

fn io_error(e: csv::Error) -> Error {
    Error::Io(format!("csv: {e}"))
}

/// Per-level realized ranks of a summary's estimates against the oracle.
pub fn accuracy_report(s: &QuantileSummary, oracle: &Oracle) -> Result<AccuracyReport> {
    if s.is_empty() {
        return Err(Error::NoData);
    }
    let levels = s
        .levels()
        .map(|(p, v)| LevelAccuracy::new(p, v, oracle.realized_rank(v)))
        .collect();
    Ok(AccuracyReport::from_levels(levels))
}

/// [`accuracy_report`] against a sorted reference sample.
pub fn rank_error_report(s: &QuantileSummary, reference: &[f64]) -> Result<AccuracyReport> {
    accuracy_report(s, &Oracle::new(reference)?)
}

/// Significance level for the change trigger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerConfig {
    alpha: f64,
}

impl TriggerConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self { alpha })
        } else {
            Err(Error::InvalidConfig(format!("alpha {alpha} outside (0, 1)")))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self { alpha: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub fired: bool,
}

/// Survival function of the Kolmogorov distribution,
/// `Q(l) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 l^2)`.
///
/// The series is cut once a term drops below 1e-10. Below `l = 0.1` the
/// result is 1 to double precision and the series is not evaluated.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda.is_nan() || lambda < 0.1 {
        return 1.0;
    }
    let a = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 2.0;
    for k in 1..=100_000u32 {
        let kf = k as f64;
        let term = sign * (a * kf * kf).exp();
        sum += term;
        if term.abs() < 1e-10 {
            break;
        }
        sign = -sign;
    }
    sum.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov p-value for statistic `d` between samples
/// of sizes `n` and `m`, with the small-sample correction on `lambda`.
pub fn ks_p_value(d: f64, n: u64, m: u64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    let ne = n * m / (n + m);
    let root = ne.sqrt();
    kolmogorov_survival((root + 0.12 + 0.11 / root) * d)
}

/// Sup distance between two CDFs over the union of their anchor sets.
pub fn ks_statistic(a: &ApproxCdf, b: &ApproxCdf) -> f64 {
    a.anchors()
        .iter()
        .chain(b.anchors())
        .map(|an| (a.eval(an.x) - b.eval(an.x)).abs())
        .fold(0.0, f64::max)
}

/// Tests the newest sorted buffer against the running summary and fires when
/// the p-value drops below `alpha`.
///
/// The statistic compares against the buffer's Hazen CDF, whose midpoints sit
/// half a step `1/(2N)` inside the step ECDF the Kolmogorov distribution is
/// tabulated for. That half step is added back before computing the p-value,
/// except when the two CDFs agree everywhere, which gives a p-value of 1.
pub fn ks_trigger(s: &QuantileSummary, d: &[f64], cfg: TriggerConfig) -> Result<TriggerOutcome> {
    let summary = summary_to_cdf(s)?;
    let buffer = empirical_cdf(d)?;
    let statistic = ks_statistic(&summary, &buffer);
    let p_value = if statistic == 0.0 {
        1.0
    } else {
        let half_step = 0.5 / d.len() as f64;
        ks_p_value(statistic + half_step, s.count(), d.len() as u64)
    };
    Ok(TriggerOutcome {
        statistic,
        p_value,
        fired: p_value < cfg.alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iq::iq_update;
    use crate::summary::ProbabilityGrid;

    #[test]
    fn realized_rank_examples() {
        let r = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(realized_rank(2.5, &r).unwrap(), 0.5);
        assert_eq!(realized_rank(-10.0, &r).unwrap(), 0.125);
        assert_eq!(realized_rank(10.0, &r).unwrap(), 0.875);
        assert_eq!(realized_rank(1.0, &[]), Err(Error::EmptyInput));
        assert!(realized_rank(1.0, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn logit_error_at_tail() {
        let want = ((0.98f64 / 0.02).ln() - (0.97f64 / 0.03).ln()).abs();
        assert!((logit_error(0.98, 0.97) - want).abs() < 1e-12);
        assert!((logit_error(0.98, 0.97) - 0.4157).abs() < 1e-4);
    }

    #[test]
    fn exact_first_flush_has_zero_error() {
        let reference: Vec<f64> = (1..=200).map(|i| (i as f64).sqrt()).collect();
        let s = iq_update(&QuantileSummary::empty(ProbabilityGrid::default()), &reference).unwrap();
        let rep = rank_error_report(&s, &reference).unwrap();
        assert!(rep.eps_max < 1e-12, "{}", rep.eps_max);
        assert!(rep.logit_max < 1e-9);
    }

    #[test]
    fn report_roundtrips_through_csv_and_json() {
        let rep = AccuracyReport::from_levels(vec![
            LevelAccuracy::new(0.5, 1.25, 0.49),
            LevelAccuracy::new(0.98, 3.0, 0.97),
        ]);
        assert_eq!(rep.eps_max, rep.levels[1].rank_error);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("p,estimate,q,rank_error,logit_error\n"));
        assert_eq!(AccuracyReport::read_csv(buf.as_slice()).unwrap(), rep);
        assert_eq!(AccuracyReport::from_json(&rep.to_json()).unwrap(), rep);
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Standard table values of the Kolmogorov survival function.
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.2238) - 0.10).abs() < 1e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        assert!(kolmogorov_survival(10.0) < 1e-80);
    }

    #[test]
    fn trigger_config_validation() {
        assert!(TriggerConfig::new(0.0).is_err());
        assert!(TriggerConfig::new(1.0).is_err());
        assert_eq!(TriggerConfig::new(0.01).unwrap().alpha(), 0.01);
    }

    #[test]
    fn identical_cdfs_do_not_fire() {
        // Summary anchored exactly where the buffer's Hazen CDF is.
        let d = [0.5, 1.5, 2.5, 3.5];
        let grid = ProbabilityGrid::new(vec![0.125, 0.375, 0.625, 0.875]).unwrap();
        let s = QuantileSummary::from_parts(
            grid,
            d.to_vec(),
            4,
            0.5f64.next_down(),
            3.5f64.next_up(),
            1,
        )
        .unwrap();
        let out = ks_trigger(&s, &d, TriggerConfig::default()).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert_eq!(out.p_value, 1.0);
        assert!(!out.fired);
    }

    #[test]
    fn disjoint_support_fires() {
        let base: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let s = iq_update(&QuantileSummary::empty(ProbabilityGrid::default()), &base).unwrap();
        let d: Vec<f64> = (0..100).map(|i| 2.0 + i as f64).collect();
        let out = ks_trigger(&s, &d, TriggerConfig::new(0.001).unwrap()).unwrap();
        assert_eq!(out.statistic, 1.0);
        assert!(out.fired);
        assert!(ks_trigger(&QuantileSummary::empty(ProbabilityGrid::default()), &d, TriggerConfig::default()).is_err());
        assert!(ks_trigger(&s, &[], TriggerConfig::default()).is_err());
    }
}
