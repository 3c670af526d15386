//! Weighted isotonic regression (pool-adjacent-violators) and the monotone
//! piecewise-linear calibration map built from its solution.

use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::binning::BinStats;
use crate::error::{Error, Result};

/// Solution of `min Σ w_b (v_b − t_b)²` subject to `v_1 ≤ … ≤ v_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicFit {
    /// Fitted value per input position (piecewise constant).
    pub block_values: Vec<f64>,
    /// Pools formed by the solver, as index ranges into the input.
    pub blocks: Vec<Range<usize>>,
    /// Weighted squared error at the solution.
    pub objective: f64,
}

impl IsotonicFit {
    pub fn len(&self) -> usize {
        self.block_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.block_values.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
struct Pool {
    start: usize,
    end: usize,
    weight: f64,
    weighted_sum: f64,
}

impl Pool {
    fn value(&self) -> f64 {
        self.weighted_sum / self.weight
    }
}

/// Pool-adjacent-violators in O(M).
///
/// Each pool keeps its raw weighted sum so the pooled value is always the
/// exact weighted mean of its members rather than an accumulated average.
pub fn pava(targets: &[f64], weights: &[f64]) -> Result<IsotonicFit> {
    if targets.is_empty() {
        return Err(Error::EmptyInput);
    }
    if targets.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: targets.len(),
            actual: weights.len(),
        });
    }
    if let Some(index) = targets.iter().position(|t| !t.is_finite()) {
        return Err(Error::NonFinite(index));
    }
    if let Some(index) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::NonpositiveWeight {
            index,
            value: weights[index],
        });
    }

    let mut stack: Vec<Pool> = Vec::with_capacity(targets.len());
    for (i, (&t, &w)) in targets.iter().zip(weights).enumerate() {
        let mut cur = Pool {
            start: i,
            end: i + 1,
            weight: w,
            weighted_sum: w * t,
        };
        while let Some(prev) = stack.last() {
            if prev.value() <= cur.value() {
                break;
            }
            let prev = stack.pop().expect("non-empty");
            cur = Pool {
                start: prev.start,
                end: cur.end,
                weight: prev.weight + cur.weight,
                weighted_sum: prev.weighted_sum + cur.weighted_sum,
            };
        }
        stack.push(cur);
    }

    let mut block_values = Vec::with_capacity(targets.len());
    let mut blocks = Vec::with_capacity(stack.len());
    for pool in &stack {
        let v = pool.value();
        block_values.extend(core::iter::repeat_n(v, pool.end - pool.start));
        blocks.push(pool.start..pool.end);
    }
    let objective = block_values
        .iter()
        .zip(targets)
        .zip(weights)
        .map(|((v, t), w)| w * (v - t) * (v - t))
        .sum();
    Ok(IsotonicFit {
        block_values,
        blocks,
        objective,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extrapolation {
    /// Outside the breakpoint range, return the nearest endpoint value.
    #[default]
    Clamp,
}

/// Monotone piecewise-linear map `[0, 1] → [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMap")]
pub struct CalibrationMap {
    breakpoints_x: Vec<f64>,
    breakpoints_y: Vec<f64>,
    extrapolation: Extrapolation,
}

#[derive(Deserialize)]
struct RawMap {
    breakpoints_x: Vec<f64>,
    breakpoints_y: Vec<f64>,
    #[serde(default)]
    extrapolation: Extrapolation,
}

impl TryFrom<RawMap> for CalibrationMap {
    type Error = Error;

    fn try_from(raw: RawMap) -> Result<Self> {
        let mut map = CalibrationMap::from_breakpoints(raw.breakpoints_x, raw.breakpoints_y)?;
        map.extrapolation = raw.extrapolation;
        Ok(map)
    }
}

fn check_unit_nondecreasing(values: &[f64]) -> Result<()> {
    if let Some(&bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::OutOfRange(bad));
    }
    if let Some(i) = values.windows(2).position(|w| w[0] > w[1]) {
        return Err(Error::Unsorted(i + 1));
    }
    Ok(())
}

impl CalibrationMap {
    pub fn from_breakpoints(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::EmptyInput);
        }
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                expected: x.len(),
                actual: y.len(),
            });
        }
        check_unit_nondecreasing(&x)?;
        check_unit_nondecreasing(&y)?;
        if let Some(i) = x.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::Unsorted(i + 1));
        }
        Ok(Self {
            breakpoints_x: x,
            breakpoints_y: y,
            extrapolation: Extrapolation::Clamp,
        })
    }

    pub fn identity() -> Self {
        Self::from_breakpoints(alloc::vec![0.0, 1.0], alloc::vec![0.0, 1.0])
            .expect("valid breakpoints")
    }

    pub fn breakpoints_x(&self) -> &[f64] {
        &self.breakpoints_x
    }

    pub fn breakpoints_y(&self) -> &[f64] {
        &self.breakpoints_y
    }

    pub fn extrapolation(&self) -> Extrapolation {
        self.extrapolation
    }

    /// Calibrated value for a prediction `p ∈ [0, 1]`.
    pub fn evaluate(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange(p));
        }
        Ok(self.evaluate_unchecked(p))
    }

    /// Like [`evaluate`](Self::evaluate) without the range check; values
    /// outside the breakpoint range clamp to the endpoints.
    pub fn evaluate_unchecked(&self, p: f64) -> f64 {
        let xs = &self.breakpoints_x;
        let ys = &self.breakpoints_y;
        let last = xs.len() - 1;
        if p <= xs[0] {
            return ys[0];
        }
        if p >= xs[last] {
            return ys[last];
        }
        // xs[hi - 1] < p < xs[hi]
        let hi = xs.partition_point(|&x| x <= p);
        let (x0, x1, y0, y1) = (xs[hi - 1], xs[hi], ys[hi - 1], ys[hi]);
        // Clamping to the segment keeps rounding from breaking monotonicity
        // across breakpoints.
        (y0 + (y1 - y0) * ((p - x0) / (x1 - x0))).clamp(y0, y1)
    }
}

/// Turn binned isotonic values into a continuous map through the points
/// `(ĉ_b, m_b)`. Bins sharing an identical `ĉ_b` collapse to one breakpoint
/// holding the mean of their fitted values.
pub fn build_map(bins: &BinStats, fit: &IsotonicFit) -> Result<CalibrationMap> {
    build_map_from_points(&bins.mean_confidence, &fit.block_values)
}

pub(crate) fn build_map_from_points(confidence: &[f64], fitted: &[f64]) -> Result<CalibrationMap> {
    if confidence.len() != fitted.len() {
        return Err(Error::LengthMismatch {
            expected: confidence.len(),
            actual: fitted.len(),
        });
    }
    if confidence.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(i) = confidence.windows(2).position(|w| w[0] > w[1]) {
        return Err(Error::Unsorted(i + 1));
    }
    let mut xs = Vec::with_capacity(confidence.len());
    let mut ys = Vec::with_capacity(confidence.len());
    let mut i = 0;
    while i < confidence.len() {
        let mut j = i + 1;
        while j < confidence.len() && confidence[j] == confidence[i] {
            j += 1;
        }
        let group = &fitted[i..j];
        let mean = group.iter().sum::<f64>() / group.len() as f64;
        // The mean of a nondecreasing run stays within its extremes.
        xs.push(confidence[i]);
        ys.push(mean.clamp(group[0], group[group.len() - 1]));
        i = j;
    }
    CalibrationMap::from_breakpoints(xs, ys)
}
