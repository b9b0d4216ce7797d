//! Reference computations for tests. These deliberately avoid the library's
//! CDF code so they can serve as independent oracles.

#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn normal_stream(seed: u64, mean: f64, sd: f64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(mean, sd).unwrap();
    (0..len).map(|_| d.sample(&mut rng)).collect()
}

pub fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Hazen sample quantile: position `h = T p + 1/2` (1-based), linear between
/// order statistics, clamped to the extremes.
pub fn hazen_quantile(sorted: &[f64], p: f64) -> f64 {
    let t = sorted.len();
    let h = t as f64 * p + 0.5;
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= t as f64 {
        return sorted[t - 1];
    }
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
}

/// Realized rank of `x` in a sorted sample under Hazen interpolation, clamped
/// to `[1/(2T), 1 - 1/(2T)]`.
pub fn hazen_rank(sorted: &[f64], x: f64) -> f64 {
    let t = sorted.len() as f64;
    let k = sorted.partition_point(|&v| v <= x);
    let raw = if k == 0 {
        0.0
    } else if k == sorted.len() {
        1.0
    } else if sorted[k - 1] == x {
        (k as f64 - 0.5) / t
    } else {
        let (x0, x1) = (sorted[k - 1], sorted[k]);
        let (f0, f1) = ((k as f64 - 0.5) / t, (k as f64 + 0.5) / t);
        f0 + (x - x0) / (x1 - x0) * (f1 - f0)
    };
    raw.clamp(0.5 / t, 1.0 - 0.5 / t)
}

/// Evaluates the piecewise-linear CDF through `points` (sorted by x, levels
/// from 0 to 1), clamped outside. Assumes distinct x.
pub fn linear_cdf(points: &[(f64, f64)], x: f64) -> f64 {
    if x <= points[0].0 {
        return if x == points[0].0 { points[0].1 } else { 0.0 };
    }
    for w in points.windows(2) {
        let ((x0, f0), (x1, f1)) = (w[0], w[1]);
        if x <= x1 {
            return f0 + (x - x0) / (x1 - x0) * (f1 - f0);
        }
    }
    1.0
}

/// Smallest x in `[lo, hi]` with `f(x) >= p`, by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, p: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= p {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
