//! Case-level percentile bootstrap.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RESAMPLES: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Linear-interpolation quantile of an ascending slice (numpy's default).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let below = libm::floor(h) as usize;
    let above = (below + 1).min(sorted.len() - 1);
    let frac = h - below as f64;
    sorted[below] + frac * (sorted[above] - sorted[below])
}

/// Mean that returns exactly `c` when every value is `c`.
fn bounded_mean(values: &[f64]) -> f64 {
    let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        sum += v;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (sum / values.len() as f64).clamp(lo, hi)
}

/// Resample `values` with replacement `resamples` times and summarize the
/// resample means: their grand mean plus the central `level` percentile
/// interval.
pub fn bootstrap_ci(values: &[f64], resamples: usize, seed: u64, level: f64) -> Result<Interval> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if resamples == 0 {
        return Err(Error::InvalidConfig("bootstrap needs at least one resample"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig("confidence level must be in (0, 1)"));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let n = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = Vec::with_capacity(n);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            draw.clear();
            draw.extend((0..n).map(|_| values[rng.random_range(0..n)]));
            bounded_mean(&draw)
        })
        .collect();
    let mean = bounded_mean(&means);
    means.sort_unstable_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let lo = quantile_sorted(&means, tail);
    let hi = quantile_sorted(&means, 1.0 - tail);
    // The grand mean sits inside the interval for any non-degenerate sample;
    // the clamp pins it there for pathological skew.
    Ok(Interval {
        mean: mean.clamp(lo, hi),
        lo,
        hi,
    })
}
