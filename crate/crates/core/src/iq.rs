//! The nominal incremental-quantile update and summary queries.
//!
//! Each flush mixes the summary's piecewise-linear CDF with the Hazen
//! empirical CDF of the sorted buffer and inverts the mixture at the grid.
//! Work per flush is O(M + N) on top of sorting the buffer, and the state
//! carried between flushes is O(M).

use crate::cdf::{check_probability, check_sorted, empirical_cdf, ApproxCdf};
use crate::error::{Error, Result};
use crate::summary::{ProbabilityGrid, QuantileSummary};

/// How the prior summary and the new buffer are weighted in the mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weighting {
    /// Prior weighted by its count `n`, buffer by its length `N`.
    Count,
    /// Prior weighted `1 - w`, buffer `w`.
    Ewma(f64),
}

/// Piecewise-linear CDF through `(min, 0)`, `(values[j], p_j)` and `(max, 1)`.
pub fn summary_to_cdf(s: &QuantileSummary) -> Result<ApproxCdf> {
    let (Some(min), Some(max)) = (s.min(), s.max()) else {
        return Err(Error::NoData);
    };
    let points = std::iter::once((min, 0.0))
        .chain(s.levels().map(|(p, v)| (v, p)))
        .chain(std::iter::once((max, 1.0)));
    ApproxCdf::from_points(points)
}

/// The mixture CDF that an update with `weighting` would invert.
pub fn combined_cdf(s: &QuantileSummary, d: &[f64], weighting: Weighting) -> Result<ApproxCdf> {
    let buffer = empirical_cdf(d)?;
    if s.is_empty() {
        return Ok(buffer);
    }
    let prior = summary_to_cdf(s)?;
    let (w_prior, w_buffer) = match weighting {
        Weighting::Count => (s.count() as f64, d.len() as f64),
        Weighting::Ewma(w) => (1.0 - w, w),
    };
    ApproxCdf::mixture(&[(w_prior, &prior), (w_buffer, &buffer)])
}

/// Inverts `cdf` at each grid level, keeping the result monotone and inside
/// `[min, max]`.
pub fn invert_at_grid(cdf: &ApproxCdf, grid: &ProbabilityGrid, min: f64, max: f64) -> Vec<f64> {
    let mut floor = min;
    grid.levels()
        .iter()
        .map(|&p| {
            // Grid levels are validated to lie in (0, 1), so inversion cannot fail.
            let v = cdf.invert(p).expect("grid level in (0, 1)").clamp(floor, max);
            floor = v;
            v
        })
        .collect()
}

pub(crate) fn update_with(
    s: &QuantileSummary,
    d: &[f64],
    weighting: Weighting,
) -> Result<QuantileSummary> {
    check_sorted(d)?;
    let cdf = combined_cdf(s, d, weighting)?;
    let (lo, hi) = (d[0], d[d.len() - 1]);
    let min = s.min().map_or(lo, |m| m.min(lo));
    let max = s.max().map_or(hi, |m| m.max(hi));
    let values = invert_at_grid(&cdf, s.grid(), min, max);
    QuantileSummary::from_parts(
        s.grid().clone(),
        values,
        s.count() + d.len() as u64,
        min,
        max,
        s.epoch() + 1,
    )
}

/// Absorbs one sorted buffer-load into the summary (count-weighted rule).
///
/// With an empty prior the result is exactly the Hazen sample quantiles of
/// `d` at the grid. A short final buffer is weighted by its actual length.
pub fn iq_update(s: &QuantileSummary, d: &[f64]) -> Result<QuantileSummary> {
    update_with(s, d, Weighting::Count)
}

/// Quantile at an arbitrary level `p`, interpolating between grid values.
pub fn query_quantile(s: &QuantileSummary, p: f64) -> Result<f64> {
    check_probability(p)?;
    summary_to_cdf(s)?.invert(p)
}

/// Estimated `F(x)`.
pub fn query_cdf(s: &QuantileSummary, x: f64) -> Result<f64> {
    Ok(summary_to_cdf(s)?.eval(x).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(levels: &[f64]) -> ProbabilityGrid {
        ProbabilityGrid::new(levels.to_vec()).unwrap()
    }

    fn quartiles() -> QuantileSummary {
        QuantileSummary::from_parts(grid(&[0.25, 0.5, 0.75]), vec![1.0, 2.0, 3.0], 12, 0.0, 4.0, 3)
            .unwrap()
    }

    #[test]
    fn summary_cdf_anchors() {
        let s = QuantileSummary::from_parts(grid(&[0.5]), vec![2.5], 4, 1.0, 4.0, 1).unwrap();
        let f = summary_to_cdf(&s).unwrap();
        let pts: Vec<_> = f.anchors().iter().map(|a| (a.x, a.hi)).collect();
        assert_eq!(pts, vec![(1.0, 0.0), (2.5, 0.5), (4.0, 1.0)]);
        assert_eq!(summary_to_cdf(&quartiles()).unwrap().eval(1.5), 0.375);
    }

    #[test]
    fn summary_cdf_collapses_value_at_min() {
        let s = QuantileSummary::from_parts(grid(&[0.25, 0.5]), vec![1.0, 2.0], 4, 1.0, 3.0, 1)
            .unwrap();
        let f = summary_to_cdf(&s).unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!((f.anchors()[0].lo, f.anchors()[0].hi), (0.0, 0.25));
        assert_eq!(query_quantile(&s, 0.25).unwrap(), 1.0);
        assert_eq!(query_quantile(&s, 0.1).unwrap(), 1.0);
    }

    #[test]
    fn summary_cdf_of_empty_is_no_data() {
        let s = QuantileSummary::empty(ProbabilityGrid::default());
        assert_eq!(summary_to_cdf(&s), Err(Error::NoData));
        assert_eq!(query_quantile(&s, 0.5), Err(Error::NoData));
        assert_eq!(query_cdf(&s, 0.0), Err(Error::NoData));
    }

    #[test]
    fn first_flush_is_hazen() {
        let s = QuantileSummary::empty(grid(&[0.5]));
        let out = iq_update(&s, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(out.values(), &[2.5]);
        assert_eq!((out.count(), out.epoch()), (4, 1));
        assert_eq!((out.min(), out.max()), (Some(1.0), Some(4.0)));
    }

    #[test]
    fn symmetric_second_flush() {
        let s = QuantileSummary::from_parts(grid(&[0.5]), vec![2.5], 4, 1.0, 4.0, 1).unwrap();
        let out = iq_update(&s, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(out.values(), &[2.5]);
        assert_eq!(out.count(), 8);
        assert_eq!(out.epoch(), 2);
    }

    #[test]
    fn partial_buffer_is_weighted_by_length() {
        let s = QuantileSummary::from_parts(grid(&[0.5]), vec![0.0], 99, -1.0, 1.0, 1).unwrap();
        let out = iq_update(&s, &[10.0]).unwrap();
        assert_eq!(out.count(), 100);
        // Prior CDF at 0 is 0.5; the buffer mass 1/100 sits at 10.
        assert!(out.values()[0] < 0.05 && out.values()[0] > 0.0);
        assert_eq!(out.max(), Some(10.0));
    }

    #[test]
    fn update_rejects_bad_buffers() {
        let s = QuantileSummary::empty(ProbabilityGrid::default());
        assert_eq!(iq_update(&s, &[]), Err(Error::EmptyInput));
        assert_eq!(iq_update(&s, &[2.0, 1.0]), Err(Error::Unsorted(1)));
        assert!(iq_update(&s, &[f64::NAN]).is_err());
    }

    #[test]
    fn quantile_queries() {
        let mut s = quartiles();
        assert_eq!(query_quantile(&s, 0.5).unwrap(), 2.0);
        assert!((query_quantile(&s, 0.1).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(query_quantile(&s, 0.375).unwrap(), 1.5);
        assert!(query_quantile(&s, 1.0).is_err());
        s = s.with_epoch(9);
        assert_eq!(s.epoch(), 9);
    }

    #[test]
    fn cdf_queries() {
        let s = quartiles();
        assert_eq!(query_cdf(&s, -3.0).unwrap(), 0.0);
        assert_eq!(query_cdf(&s, 2.0).unwrap(), 0.5);
        assert_eq!(query_cdf(&s, 3.0).unwrap(), 0.75);
        assert_eq!(query_cdf(&s, 4.0).unwrap(), 1.0);
        assert_eq!(query_cdf(&s, 9.0).unwrap(), 1.0);
    }

    #[test]
    fn all_equal_stream_stays_degenerate() {
        let mut s = QuantileSummary::empty(ProbabilityGrid::default());
        for _ in 0..3 {
            s = iq_update(&s, &[5.0; 10]).unwrap();
        }
        assert!(s.values().iter().all(|&v| v == 5.0));
        assert_eq!(s.count(), 30);
    }
}
