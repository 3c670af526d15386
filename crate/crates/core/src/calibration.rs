//! Fitting and applying calibration maps against the different targets:
//! the mean human response, one rater's mask, or one map per rater
//! averaged at inference time ("hard label").

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binning::equal_mass_bins;
use crate::error::{Error, Result};
use crate::isotonic::{build_map, pava, CalibrationMap};
use crate::volume::{RaterSet, Role, Volume};

/// Equal-mass bin count used for fitting unless configured otherwise.
pub const DEFAULT_TRAIN_BINS: usize = 250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetKind {
    /// No calibration; predictions pass through unchanged.
    None,
    /// Fit against the per-bin mean human response.
    Mhr,
    /// Fit against the mask of a single rater.
    SingleRater { rater: usize },
    /// One fit per rater; outputs averaged when applied.
    HardLabel,
}

impl TargetKind {
    /// Filesystem-friendly label, e.g. `single_rater_0`.
    pub fn label(&self) -> String {
        match self {
            TargetKind::SingleRater { rater } => alloc::format!("single_rater_{rater}"),
            other => alloc::format!("{other}"),
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetKind::None => f.write_str("none"),
            TargetKind::Mhr => f.write_str("mhr"),
            TargetKind::SingleRater { rater } => write!(f, "single_rater:{rater}"),
            TargetKind::HardLabel => f.write_str("hard_label"),
        }
    }
}

impl FromStr for TargetKind {
    type Err = Error;

    /// Accepts `none`, `mhr`, `hard_label` (or `hard-label`) and
    /// `single_rater:<i>` (or `single:<i>`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "none" => return Ok(TargetKind::None),
            "mhr" => return Ok(TargetKind::Mhr),
            "hard_label" | "hard-label" => return Ok(TargetKind::HardLabel),
            _ => {}
        }
        let (head, index) = s
            .split_once(':')
            .ok_or(Error::InvalidConfig("unknown calibration target"))?;
        if !matches!(head, "single" | "single_rater" | "single-rater") {
            return Err(Error::InvalidConfig("unknown calibration target"));
        }
        let rater = index
            .parse()
            .map_err(|_| Error::InvalidConfig("rater index must be a non-negative integer"))?;
        Ok(TargetKind::SingleRater { rater })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    #[serde(flatten)]
    pub kind: TargetKind,
    pub train_bins: usize,
}

impl TargetSpec {
    pub fn new(kind: TargetKind) -> Self {
        Self {
            kind,
            train_bins: DEFAULT_TRAIN_BINS,
        }
    }

    pub fn with_bins(mut self, bins: usize) -> Self {
        self.train_bins = bins;
        self
    }
}

/// One calibration case: a pooled prediction, its raters, and an optional
/// region-of-interest mask restricting which voxels take part.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationCase<'a> {
    pub prediction: &'a Volume,
    pub raters: &'a RaterSet,
    pub roi: Option<&'a Volume>,
}

impl<'a> CalibrationCase<'a> {
    pub fn new(prediction: &'a Volume, raters: &'a RaterSet) -> Self {
        Self {
            prediction,
            raters,
            roi: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subsample {
    /// Probability of keeping each voxel, in (0, 1].
    pub fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FitOptions {
    /// Keep a seeded uniform random subset of voxels. Off by default.
    pub subsample: Option<Subsample>,
}

/// Fitted calibrator: zero maps for `none`, one for `mhr` / `single_rater`,
/// one per rater for `hard_label`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBundle")]
pub struct CalibratorBundle {
    #[serde(flatten)]
    target: TargetKind,
    rater_count: usize,
    train_bins: usize,
    train_manifest_hash: String,
    maps: Vec<CalibrationMap>,
}

#[derive(Deserialize)]
struct RawBundle {
    #[serde(flatten)]
    target: TargetKind,
    rater_count: usize,
    train_bins: usize,
    #[serde(default)]
    train_manifest_hash: String,
    maps: Vec<CalibrationMap>,
}

impl TryFrom<RawBundle> for CalibratorBundle {
    type Error = Error;

    fn try_from(raw: RawBundle) -> Result<Self> {
        let bundle = CalibratorBundle {
            target: raw.target,
            rater_count: raw.rater_count,
            train_bins: raw.train_bins,
            train_manifest_hash: raw.train_manifest_hash,
            maps: raw.maps,
        };
        bundle.check()?;
        Ok(bundle)
    }
}

impl CalibratorBundle {
    pub fn new(
        target: TargetKind,
        rater_count: usize,
        train_bins: usize,
        maps: Vec<CalibrationMap>,
    ) -> Result<Self> {
        let bundle = Self {
            target,
            rater_count,
            train_bins,
            train_manifest_hash: String::new(),
            maps,
        };
        bundle.check()?;
        Ok(bundle)
    }

    /// Pass-through calibrator.
    pub fn uncalibrated(rater_count: usize) -> Self {
        Self {
            target: TargetKind::None,
            rater_count,
            train_bins: 0,
            train_manifest_hash: String::new(),
            maps: Vec::new(),
        }
    }

    fn check(&self) -> Result<()> {
        let expected = match self.target {
            TargetKind::None => 0,
            TargetKind::Mhr => 1,
            TargetKind::SingleRater { rater } => {
                if rater >= self.rater_count {
                    return Err(Error::RaterIndexOutOfRange {
                        index: rater,
                        count: self.rater_count,
                    });
                }
                1
            }
            TargetKind::HardLabel => self.rater_count,
        };
        if self.maps.len() != expected {
            return Err(Error::InvalidBundle("map count does not match target kind"));
        }
        if self.target != TargetKind::None && self.rater_count == 0 {
            return Err(Error::InvalidBundle("rater count must be positive"));
        }
        Ok(())
    }

    pub fn target(&self) -> TargetKind {
        self.target
    }

    pub fn maps(&self) -> &[CalibrationMap] {
        &self.maps
    }

    pub fn rater_count(&self) -> usize {
        self.rater_count
    }

    pub fn train_bins(&self) -> usize {
        self.train_bins
    }

    pub fn train_manifest_hash(&self) -> &str {
        &self.train_manifest_hash
    }

    pub fn set_train_manifest_hash(&mut self, hash: impl Into<String>) {
        self.train_manifest_hash = hash.into();
    }

    /// Calibrated value for one prediction in [0, 1].
    ///
    /// For `hard_label` this is the mean of the per-rater maps, clamped to
    /// the range of the individual outputs; the clamp keeps the result
    /// exactly monotone and exact when all maps agree.
    pub fn calibrate(&self, p: f64) -> f64 {
        match self.maps.as_slice() {
            [] => p,
            [map] => map.evaluate_unchecked(p),
            maps => {
                let mut sum = 0.0;
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for m in maps {
                    let v = m.evaluate_unchecked(p);
                    sum += v;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                (sum / maps.len() as f64).clamp(lo, hi)
            }
        }
    }

    /// Apply voxelwise to a probability volume.
    pub fn apply(&self, prediction: &Volume) -> Result<Volume> {
        prediction.validate(Role::Probability)?;
        if self.target == TargetKind::None {
            return Ok(prediction.clone());
        }
        let data = prediction
            .to_f32()
            .into_iter()
            .map(|p| self.calibrate(f64::from(p)) as f32)
            .collect();
        Ok(prediction.derive_f32(data))
    }
}

/// Voxelwise fraction of raters marking each voxel positive.
pub fn mean_human_response(raters: &RaterSet) -> Volume {
    let n = raters.rater_count() as f64;
    let columns = raters.label_columns();
    let data = (0..raters.voxel_count())
        .map(|v| {
            let positives: u32 = columns.iter().map(|c| u32::from(c[v])).sum();
            (f64::from(positives) / n) as f32
        })
        .collect();
    raters.volumes()[0].derive_f32(data)
}

/// Voxelwise arithmetic mean of `K` aligned probability volumes.
pub fn pool_ensemble(predictions: &[Volume]) -> Result<Volume> {
    let first = predictions.first().ok_or(Error::EmptyInput)?;
    for p in predictions {
        first.check_aligned(p)?;
        p.validate(Role::Probability)?;
    }
    if predictions.len() == 1 {
        return Ok(first.derive_f32(first.to_f32()));
    }
    let k = predictions.len();
    let members: Vec<Vec<f32>> = predictions.iter().map(Volume::to_f32).collect();
    let mut scratch = vec![0.0f32; k];
    let data = (0..first.len())
        .map(|v| {
            for (s, m) in scratch.iter_mut().zip(&members) {
                *s = m[v];
            }
            // Summing in sorted order makes the mean independent of input order.
            scratch.sort_unstable_by(f32::total_cmp);
            let sum: f64 = scratch.iter().map(|&x| f64::from(x)).sum();
            (sum / k as f64) as f32
        })
        .collect();
    Ok(first.derive_f32(data))
}

struct PooledVoxels {
    predictions: Vec<f32>,
    labels: Vec<Vec<u8>>,
}

fn pool_cases(cases: &[CalibrationCase<'_>], options: &FitOptions) -> Result<PooledVoxels> {
    let first = cases.first().ok_or(Error::EmptyInput)?;
    let n_raters = first.raters.rater_count();
    if let Some(s) = options.subsample {
        if !(s.fraction > 0.0 && s.fraction <= 1.0) {
            return Err(Error::InvalidConfig("subsample fraction must be in (0, 1]"));
        }
    }
    let mut rng = options
        .subsample
        .map(|s| (s.fraction, ChaCha8Rng::seed_from_u64(s.seed)));

    let mut predictions = Vec::new();
    let mut labels = vec![Vec::new(); n_raters];
    for case in cases {
        if case.raters.rater_count() != n_raters {
            return Err(Error::ShapeMismatch("rater count differs across cases"));
        }
        case.raters.check_aligned(case.prediction)?;
        case.prediction.validate(Role::Probability)?;
        let roi = match case.roi {
            Some(mask) => {
                case.raters.check_aligned(mask)?;
                Some(mask.labels()?)
            }
            None => None,
        };
        let preds = case.prediction.to_f32();
        let columns = case.raters.label_columns();
        for (v, &p) in preds.iter().enumerate() {
            if roi.is_some_and(|m| m[v] == 0) {
                continue;
            }
            if let Some((fraction, rng)) = rng.as_mut() {
                if rng.random::<f64>() >= *fraction {
                    continue;
                }
            }
            predictions.push(p);
            for (dst, col) in labels.iter_mut().zip(&columns) {
                dst.push(col[v]);
            }
        }
    }
    Ok(PooledVoxels {
        predictions,
        labels,
    })
}

/// Fit a calibrator on the pooled voxels of all calibration cases.
///
/// Voxels are cut into `spec.train_bins` equal-mass bins; the per-bin target
/// is the MHR rate, one rater's rate, or (hard label) each rater's rate in
/// turn, and each target is fitted with weighted PAVA using the bin weights.
pub fn fit(
    cases: &[CalibrationCase<'_>],
    spec: &TargetSpec,
    options: &FitOptions,
) -> Result<CalibratorBundle> {
    let first = cases.first().ok_or(Error::EmptyInput)?;
    let n_raters = first.raters.rater_count();
    if spec.train_bins == 0 {
        return Err(Error::ZeroBins);
    }
    if let TargetKind::SingleRater { rater } = spec.kind {
        if rater >= n_raters {
            return Err(Error::RaterIndexOutOfRange {
                index: rater,
                count: n_raters,
            });
        }
    }
    if spec.kind == TargetKind::None {
        return Ok(CalibratorBundle::uncalibrated(n_raters));
    }

    let pooled = pool_cases(cases, options)?;
    let bins = equal_mass_bins(&pooled.predictions, &pooled.labels, spec.train_bins)?;
    let fit_target = |target: &[f64]| -> Result<CalibrationMap> {
        let solution = pava(target, &bins.weights)?;
        build_map(&bins, &solution)
    };
    let maps = match spec.kind {
        TargetKind::Mhr => vec![fit_target(&bins.mhr_rate)?],
        TargetKind::SingleRater { rater } => vec![fit_target(&bins.rater_column(rater))?],
        TargetKind::HardLabel => (0..n_raters)
            .map(|i| fit_target(&bins.rater_column(i)))
            .collect::<Result<_>>()?,
        TargetKind::None => unreachable!("handled above"),
    };
    CalibratorBundle::new(spec.kind, n_raters, spec.train_bins, maps)
}
