//! Piecewise-linear CDFs: the common currency of every estimator.
//!
//! An [`ApproxCdf`] is a list of anchors with strictly increasing `x`. Each
//! anchor carries the left limit `lo` and the value `hi` of the CDF at `x`, so
//! a point mass (several observations or quantile estimates sharing one `x`)
//! is a single anchor with `lo < hi`. Between anchors the CDF is linear from
//! the left anchor's `hi` to the right anchor's `lo`. Below the first anchor it
//! is 0 and above the last it is 1.

use crate::error::{Error, Result};

/// One breakpoint of a piecewise-linear CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub x: f64,
    /// Left limit of the CDF at `x`.
    pub lo: f64,
    /// Value of the CDF at `x` (right-continuous).
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxCdf {
    anchors: Vec<Anchor>,
}

impl ApproxCdf {
    /// Builds a CDF from already-merged anchors, validating every invariant.
    pub fn new(anchors: Vec<Anchor>) -> Result<Self> {
        let first = anchors
            .first()
            .ok_or_else(|| Error::InvalidCdf("no anchors".into()))?;
        if first.lo != 0.0 {
            return Err(Error::InvalidCdf(format!("first anchor starts at {}", first.lo)));
        }
        let last = anchors[anchors.len() - 1];
        if last.hi != 1.0 {
            return Err(Error::InvalidCdf(format!("last anchor ends at {}", last.hi)));
        }
        let mut prev: Option<&Anchor> = None;
        for a in &anchors {
            if !a.x.is_finite() {
                return Err(Error::NonFinite(a.x));
            }
            if !(0.0..=1.0).contains(&a.lo) || !(a.lo..=1.0).contains(&a.hi) {
                return Err(Error::InvalidCdf(format!(
                    "anchor at x = {} has levels {}..{}",
                    a.x, a.lo, a.hi
                )));
            }
            if let Some(p) = prev {
                if a.x <= p.x {
                    return Err(Error::InvalidCdf("x not strictly increasing".into()));
                }
                if a.lo < p.hi {
                    return Err(Error::InvalidCdf("levels decrease".into()));
                }
            }
            prev = Some(a);
        }
        Ok(Self { anchors })
    }

    /// Builds a CDF from `(x, F)` points with nondecreasing `x` and `F`.
    /// Points sharing an `x` collapse into one anchor spanning their levels.
    pub fn from_points<I>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut anchors: Vec<Anchor> = Vec::new();
        for (x, f) in points {
            match anchors.last_mut() {
                Some(last) if last.x == x => {
                    if f < last.hi {
                        return Err(Error::InvalidCdf("levels decrease".into()));
                    }
                    last.hi = f;
                }
                Some(last) if x < last.x => {
                    return Err(Error::InvalidCdf("x decreases".into()));
                }
                _ => anchors.push(Anchor { x, lo: f, hi: f }),
            }
        }
        Self::new(anchors)
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// Smallest `x` carrying probability.
    pub fn lower(&self) -> f64 {
        self.anchors[0].x
    }

    /// Largest `x` carrying probability.
    pub fn upper(&self) -> f64 {
        self.anchors[self.anchors.len() - 1].x
    }

    /// `F(x)`, right-continuous at point masses.
    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.anchors.partition_point(|a| a.x < x);
        self.levels_at(x, idx).1
    }

    /// Left limit `F(x-)`.
    pub fn eval_left(&self, x: f64) -> f64 {
        let idx = self.anchors.partition_point(|a| a.x < x);
        self.levels_at(x, idx).0
    }

    /// `(F(x-), F(x))` given `idx`, the index of the first anchor with `x_a >= x`.
    fn levels_at(&self, x: f64, idx: usize) -> (f64, f64) {
        let Some(right) = self.anchors.get(idx) else {
            return (1.0, 1.0);
        };
        if right.x == x {
            return (right.lo, right.hi);
        }
        if idx == 0 {
            return (0.0, 0.0);
        }
        let left = self.anchors[idx - 1];
        let t = (x - left.x) / (right.x - left.x);
        let f = left.hi + t * (right.lo - left.hi);
        (f, f)
    }

    /// Inverse CDF at `p` in (0, 1).
    ///
    /// Returns the smallest `x` with `F(x) >= p`, except where `F` is flat at
    /// exactly `p` over `[a, b]`, in which case the midpoint `(a + b) / 2` is
    /// returned.
    pub fn invert(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        let a = &self.anchors;

        // Leftmost x on the graph with F >= p.
        let i = a.partition_point(|an| an.hi < p);
        let left = if a[i].lo <= p {
            a[i].x
        } else {
            // a[i].lo > p >= ... > a[i-1].hi, and i >= 1 because a[0].lo == 0 < p.
            lerp_x(a[i - 1].x, a[i - 1].hi, a[i].x, a[i].lo, p)
        };

        // Rightmost x on the graph with F <= p.
        let j = a.partition_point(|an| an.lo <= p) - 1;
        let right = if a[j].hi >= p {
            a[j].x
        } else {
            // a[j].hi < p < a[j+1].lo; j is not the last anchor because its hi == 1 > p.
            lerp_x(a[j].x, a[j].hi, a[j + 1].x, a[j + 1].lo, p)
        };

        Ok(if left == right { left } else { 0.5 * (left + right) })
    }

    /// Weighted mixture `sum w_i F_i / sum w_i` of CDFs, represented exactly.
    ///
    /// Every component is linear between consecutive points of the union of
    /// anchor sets, so the mixture only needs anchors there.
    pub fn mixture(components: &[(f64, &ApproxCdf)]) -> Result<ApproxCdf> {
        if components.is_empty() {
            return Err(Error::NoData);
        }
        let total: f64 = components.iter().map(|(w, _)| *w).sum();
        for (w, _) in components {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidConfig(format!("mixture weight {w}")));
            }
        }
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidConfig("mixture weights sum to zero".into()));
        }
        if let [(_, only)] = components {
            return Ok((*only).clone());
        }

        let mut xs: Vec<f64> = components
            .iter()
            .flat_map(|(_, c)| c.anchors.iter().map(|a| a.x))
            .collect();
        xs.sort_unstable_by(f64::total_cmp);
        xs.dedup();

        let mut cursors = vec![0usize; components.len()];
        let mut anchors = Vec::with_capacity(xs.len());
        let mut floor = 0.0f64;
        for &x in &xs {
            let (mut lo, mut hi) = (0.0, 0.0);
            for ((w, cdf), cursor) in components.iter().zip(cursors.iter_mut()) {
                while *cursor < cdf.anchors.len() && cdf.anchors[*cursor].x < x {
                    *cursor += 1;
                }
                let (l, h) = cdf.levels_at(x, *cursor);
                lo += w * l;
                hi += w * h;
            }
            lo = (lo / total).clamp(floor, 1.0);
            hi = (hi / total).clamp(lo, 1.0);
            floor = hi;
            anchors.push(Anchor { x, lo, hi });
        }
        anchors[0].lo = 0.0;
        let last = anchors.len() - 1;
        anchors[last].hi = 1.0;
        ApproxCdf::new(anchors)
    }
}

fn lerp_x(x0: f64, f0: f64, x1: f64, f1: f64, p: f64) -> f64 {
    let x = x0 + (p - f0) / (f1 - f0) * (x1 - x0);
    x.clamp(x0, x1)
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

/// Checks that `d` is nonempty, finite and sorted ascending.
pub(crate) fn check_sorted(d: &[f64]) -> Result<()> {
    if d.is_empty() {
        return Err(Error::EmptyInput);
    }
    for (i, &x) in d.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFinite(x));
        }
        if i > 0 && x < d[i - 1] {
            return Err(Error::Unsorted(i));
        }
    }
    Ok(())
}

/// Hazen empirical CDF of a sorted sample: anchors at `(d_i, (i - 0.5) / N)`,
/// closed off one ulp outside the extremes with levels 0 and 1.
pub fn empirical_cdf(d: &[f64]) -> Result<ApproxCdf> {
    check_sorted(d)?;
    let n = d.len();
    let denom = 2.0 * n as f64;
    let head = std::iter::once((d[0].next_down(), 0.0));
    let body = d
        .iter()
        .enumerate()
        .map(|(i, &x)| (x, (2 * i + 1) as f64 / denom));
    let tail = std::iter::once((d[n - 1].next_up(), 1.0));
    ApproxCdf::from_points(head.chain(body).chain(tail))
}

/// Free-function form of [`ApproxCdf::invert`].
pub fn invert_cdf(f: &ApproxCdf, p: f64) -> Result<f64> {
    f.invert(p)
}
