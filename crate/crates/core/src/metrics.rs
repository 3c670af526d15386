//! Evaluation metrics for soft multi-rater segmentation.
//!
//! * [`tdsc`]: Dice between prediction and MHR, thresholded at several
//!   operating points and averaged.
//! * [`ece_per_rater`]: uniform-bin expected calibration error computed
//!   against each rater and averaged over raters.
//! * [`crps_case`]: CRPS of the predicted soft volume against a normal
//!   distribution fitted to the rater volumes.
//! * [`wasserstein1`]: 1-D Wasserstein distance between empirical samples.
//!
//! Dice of two empty masks is defined as 1: both sides agree there is no
//! lesion. This matters for TDSC at high thresholds.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::binning::{uniform_bins, BinStats, UniformBinAccumulator};
use crate::calibration::mean_human_response;
use crate::error::{Error, Result};
use crate::volume::{RaterSet, Role, Volume};

pub const DEFAULT_ECE_BINS: usize = 50;

/// Thresholds 0.1, 0.2, …, 0.9.
pub fn default_tdsc_thresholds() -> Vec<f64> {
    (1..10).map(|k| f64::from(k) / 10.0).collect()
}

fn dice_from_counts(intersection: usize, a: usize, b: usize) -> f64 {
    if a + b == 0 {
        1.0
    } else {
        2.0 * intersection as f64 / (a + b) as f64
    }
}

/// Dice overlap `2|A∩B| / (|A|+|B|)` of two masks; nonzero voxels count as
/// foreground.
pub fn dice(a: &Volume, b: &Volume) -> Result<f64> {
    a.check_aligned(b)?;
    let (mut inter, mut na, mut nb) = (0, 0, 0);
    for v in 0..a.len() {
        let x = a.value(v) != 0.0;
        let y = b.value(v) != 0.0;
        na += usize::from(x);
        nb += usize::from(y);
        inter += usize::from(x && y);
    }
    Ok(dice_from_counts(inter, na, nb))
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::EmptyThresholds);
    }
    if let Some(&t) = thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::InvalidThreshold(t));
    }
    Ok(())
}

/// Mean over `t` of `dice(prediction ≥ t, mhr ≥ t)`.
pub fn tdsc(prediction: &Volume, mhr: &Volume, thresholds: &[f64]) -> Result<f64> {
    prediction.check_aligned(mhr)?;
    check_thresholds(thresholds)?;
    let p = prediction.to_f32();
    let m = mhr.to_f32();
    let total: f64 = thresholds
        .iter()
        .map(|&t| {
            let (mut inter, mut na, mut nb) = (0, 0, 0);
            for (&x, &y) in p.iter().zip(&m) {
                let a = f64::from(x) >= t;
                let b = f64::from(y) >= t;
                na += usize::from(a);
                nb += usize::from(b);
                inter += usize::from(a && b);
            }
            dice_from_counts(inter, na, nb)
        })
        .sum();
    Ok(total / thresholds.len() as f64)
}

fn weighted_gap(stats: &BinStats, target: impl Fn(usize) -> f64) -> f64 {
    stats
        .occupied()
        .map(|b| stats.weights[b] * (stats.mean_confidence[b] - target(b)).abs())
        .sum()
}

/// `ECE(i) = Σ_b w_b |ĉ_b − acc_{b,i}|` for each rater, averaged over raters.
pub fn ece_per_rater(prediction: &Volume, raters: &RaterSet, bins: usize) -> Result<f64> {
    raters.check_aligned(prediction)?;
    let preds = prediction.to_f32();
    let stats = uniform_bins(&preds, &raters.label_columns(), bins)?;
    let n = raters.rater_count();
    let total: f64 = (0..n)
        .map(|i| weighted_gap(&stats, |b| stats.per_rater_rate[b][i]))
        .sum();
    Ok(total / n as f64)
}

/// ECE against the per-bin MHR instead of individual raters. Used for the
/// reliability view; the per-rater variant is the reported metric.
pub fn ece_against_mhr(prediction: &Volume, raters: &RaterSet, bins: usize) -> Result<f64> {
    raters.check_aligned(prediction)?;
    let preds = prediction.to_f32();
    let stats = uniform_bins(&preds, &raters.label_columns(), bins)?;
    Ok(weighted_gap(&stats, |b| stats.mhr_rate[b]))
}

/// Reliability diagram data: uniform bins of prediction against the
/// empirical MHR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityCurve {
    pub bin_edges: Vec<f64>,
    pub mean_confidence: Vec<f64>,
    pub empirical_mhr: Vec<f64>,
    pub weight: Vec<f64>,
    pub count: Vec<usize>,
    pub occupied: Vec<bool>,
}

impl ReliabilityCurve {
    pub fn from_stats(stats: &BinStats) -> Self {
        let m = stats.bin_count();
        Self {
            bin_edges: (0..=m).map(|k| k as f64 / m as f64).collect(),
            mean_confidence: stats.mean_confidence.clone(),
            empirical_mhr: stats.mhr_rate.clone(),
            weight: stats.weights.clone(),
            count: stats.counts.clone(),
            occupied: stats.counts.iter().map(|&c| c > 0).collect(),
        }
    }

    pub fn bin_count(&self) -> usize {
        self.weight.len()
    }

    /// Weighted mean distance from the diagonal, `Σ_b w_b |ĉ_b − ȳ_b|`.
    pub fn calibration_gap(&self) -> f64 {
        (0..self.bin_count())
            .filter(|&b| self.occupied[b])
            .map(|b| self.weight[b] * (self.mean_confidence[b] - self.empirical_mhr[b]).abs())
            .sum()
    }
}

/// Reliability curve pooled over cases; voxels of all cases share one set
/// of uniform bins.
pub fn reliability(cases: &[(&Volume, &RaterSet)], bins: usize) -> Result<ReliabilityCurve> {
    let (_, first) = cases.first().ok_or(Error::EmptyInput)?;
    let mut acc = UniformBinAccumulator::new(bins, first.rater_count())?;
    for (prediction, raters) in cases {
        raters.check_aligned(prediction)?;
        acc.add(&prediction.to_f32(), &raters.label_columns())?;
    }
    Ok(ReliabilityCurve::from_stats(&acc.finish()))
}

/// `Σ_x p(x)` scaled by the physical voxel volume.
pub fn soft_volume(prediction: &Volume) -> f64 {
    let sum: f64 = (0..prediction.len()).map(|v| prediction.value(v)).sum();
    sum * prediction.header().voxel_volume()
}

/// Physical volume of each rater's mask.
pub fn rater_volumes(raters: &RaterSet) -> Vec<f64> {
    raters.volumes().iter().map(soft_volume).collect()
}

fn std_normal_pdf(z: f64) -> f64 {
    libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * PI)
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Closed-form CRPS of the point `x` against `Normal(mu, sigma)`:
/// `σ [z(2Φ(z) − 1) + 2φ(z) − 1/√π]` with `z = (x − μ)/σ`.
/// `sigma == 0` is the point-mass case and returns `|x − mu|`.
pub fn crps_gaussian(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    if sigma < 0.0 || sigma.is_nan() {
        return Err(Error::NegativeSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok((x - mu).abs());
    }
    let z = (x - mu) / sigma;
    let value = sigma
        * (z * (2.0 * std_normal_cdf(z) - 1.0) + 2.0 * std_normal_pdf(z)
            - 1.0 / libm::sqrt(PI));
    // Rounding can produce tiny negatives near the minimum.
    Ok(value.max(0.0))
}

/// Sample mean and standard deviation (ddof = 1; zero for a single value).
pub fn fit_normal(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((mean, libm::sqrt(ss / (n - 1.0))))
}

/// CRPS of the prediction's soft volume against a normal distribution
/// fitted by moments to the rater volumes.
pub fn crps_case(prediction: &Volume, raters: &RaterSet) -> Result<f64> {
    raters.check_aligned(prediction)?;
    let (mu, sigma) = fit_normal(&rater_volumes(raters))?;
    crps_gaussian(soft_volume(prediction), mu, sigma)
}

/// Wasserstein-1 distance between the empirical distributions of two
/// samples: `∫ |F_a(t) − F_b(t)| dt`.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(i) = a.iter().chain(b).position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    if a.len() == b.len() {
        let sum: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        return Ok(sum / a.len() as f64);
    }
    // Sweep the merged support, integrating |F_a − F_b| piecewise.
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    let mut prev = a[0].min(b[0]);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (next - prev);
        while i < a.len() && a[i] == next {
            i += 1;
        }
        while j < b.len() && b[j] == next {
            j += 1;
        }
        prev = next;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalParams {
    pub tdsc_thresholds: Vec<f64>,
    pub ece_bins: usize,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            tdsc_thresholds: default_tdsc_thresholds(),
            ece_bins: DEFAULT_ECE_BINS,
        }
    }
}

/// All per-case metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub tdsc: f64,
    pub ece: f64,
    pub crps: f64,
    pub soft_volume: f64,
    pub rater_volumes: Vec<f64>,
}

pub fn evaluate_case(
    prediction: &Volume,
    raters: &RaterSet,
    params: &EvalParams,
) -> Result<CaseMetrics> {
    prediction.validate(Role::Probability)?;
    raters.check_aligned(prediction)?;
    let mhr = mean_human_response(raters);
    let rater_volumes = rater_volumes(raters);
    let (mu, sigma) = fit_normal(&rater_volumes)?;
    let soft = soft_volume(prediction);
    Ok(CaseMetrics {
        tdsc: tdsc(prediction, &mhr, &params.tdsc_thresholds)?,
        ece: ece_per_rater(prediction, raters, params.ece_bins)?,
        crps: crps_gaussian(soft, mu, sigma)?,
        soft_volume: soft,
        rater_volumes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn mask(data: Vec<u8>) -> Volume {
        let n = data.len();
        Volume::mask([n, 1, 1], [1.0; 3], data).unwrap()
    }

    fn prob(data: Vec<f32>) -> Volume {
        let n = data.len();
        Volume::probability([n, 1, 1], [1.0; 3], data).unwrap()
    }

    #[test]
    fn dice_cases() {
        let a = mask(vec![1, 1, 0, 0]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &mask(vec![0, 0, 1, 1])).unwrap(), 0.0);
        assert_eq!(dice(&a, &mask(vec![0, 1, 1, 0])).unwrap(), 0.5);
        let empty = mask(vec![0; 4]);
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        assert!(matches!(
            dice(&a, &mask(vec![0; 3])),
            Err(Error::DimsMismatch { .. })
        ));
    }

    #[test]
    fn tdsc_identical_and_complement() {
        let m = prob(vec![0.0, 0.2, 0.6, 1.0]);
        assert_eq!(tdsc(&m, &m, &default_tdsc_thresholds()).unwrap(), 1.0);
        let hard = prob(vec![0.0, 1.0, 1.0, 0.0]);
        let comp = prob(vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(tdsc(&comp, &hard, &default_tdsc_thresholds()).unwrap(), 0.0);
    }

    #[test]
    fn tdsc_threshold_validation() {
        let m = prob(vec![0.5]);
        assert_eq!(tdsc(&m, &m, &[]), Err(Error::EmptyThresholds));
        assert_eq!(tdsc(&m, &m, &[0.0]), Err(Error::InvalidThreshold(0.0)));
        assert_eq!(tdsc(&m, &m, &[1.0]), Err(Error::InvalidThreshold(1.0)));
    }

    #[test]
    fn ece_examples() {
        // Constant 0.6 against a rater with 60% positives; 0.6f32 is off by ~2e-8.
        let p = prob(vec![0.6; 10]);
        let r = RaterSet::new(vec![mask(vec![1, 1, 1, 1, 1, 1, 0, 0, 0, 0])]).unwrap();
        assert!(ece_per_rater(&p, &r, 50).unwrap() < 1e-7);
        let p = prob(vec![0.5; 10]);
        let r = RaterSet::new(vec![mask(vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0])]).unwrap();
        assert_eq!(ece_per_rater(&p, &r, 50).unwrap(), 0.0);

        let p = prob(vec![1.0; 4]);
        let r = RaterSet::new(vec![mask(vec![0; 4])]).unwrap();
        assert_eq!(ece_per_rater(&p, &r, 50).unwrap(), 1.0);

        let p = prob(vec![0.5; 4]);
        let r = RaterSet::new(vec![mask(vec![1; 4]), mask(vec![0; 4])]).unwrap();
        assert_eq!(ece_per_rater(&p, &r, 50).unwrap(), 0.5);
        assert_eq!(ece_against_mhr(&p, &r, 50).unwrap(), 0.0);
    }

    #[test]
    fn soft_volume_examples() {
        assert_eq!(soft_volume(&prob(vec![0.0; 5])), 0.0);
        let m = Volume::mask([10, 1, 1], [1.0; 3], vec![1; 10]).unwrap();
        assert_eq!(soft_volume(&m), 10.0);
        let v = Volume::probability([2, 2, 2], [2.0, 1.0, 1.0], vec![0.5; 8]).unwrap();
        assert_eq!(soft_volume(&v), 8.0);
    }

    #[test]
    fn crps_point_mass_and_errors() {
        assert_eq!(crps_gaussian(3.0, 1.0, 0.0).unwrap(), 2.0);
        assert_eq!(crps_gaussian(1.0, 1.0, -1.0), Err(Error::NegativeSigma(-1.0)));
    }

    #[test]
    fn crps_at_mean() {
        let expected = 2.0 / (2.0 * PI).sqrt() - 1.0 / PI.sqrt();
        assert!((crps_gaussian(0.0, 0.0, 1.0).unwrap() - expected).abs() < 1e-15);
        assert!((crps_gaussian(0.0, 0.0, 1.0).unwrap() - 0.23369).abs() < 1e-5);
    }

    #[test]
    fn crps_case_unanimous_raters() {
        let r = RaterSet::new(vec![mask(vec![1, 1, 0]); 3]).unwrap();
        let p = prob(vec![1.0, 1.0, 0.0]);
        assert_eq!(crps_case(&p, &r).unwrap(), 0.0);
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(wasserstein1(&[0.3, 0.1], &[0.1, 0.3]).unwrap(), 0.0);
        assert_eq!(wasserstein1(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(wasserstein1(&[0.0, 0.0], &[0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(wasserstein1(&[], &[1.0]), Err(Error::EmptyInput));
        // Unequal sizes: {0} vs {0, 1}: F differ by 1/2 on [0, 1).
        assert_eq!(wasserstein1(&[0.0], &[0.0, 1.0]).unwrap(), 0.5);
    }

    #[test]
    fn reliability_constant_prediction() {
        let p = prob(vec![0.3; 6]);
        let r = RaterSet::new(vec![mask(vec![1, 0, 0, 1, 0, 0])]).unwrap();
        let curve = reliability(&[(&p, &r)], 50).unwrap();
        assert_eq!(curve.occupied.iter().filter(|&&o| o).count(), 1);
        assert_eq!(curve.bin_edges.len(), 51);
    }
}
