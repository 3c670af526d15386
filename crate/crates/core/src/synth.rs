//! Synthetic multi-rater cases with a known latent probability field.
//!
//! Each case has a latent field `p(x)` made of soft radial blobs on an empty
//! background, a prediction `g(p(x))` for a configured monotone distortion
//! `g`, and N rater masks drawn from `p`. Because `g` is known, the ideal
//! MHR calibration map is `g⁻¹` (see [`Distortion::inverse`]).

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{RaterSet, Volume};

/// Identifier of the generator and seeding scheme, recorded with every
/// dataset so it can be reproduced.
pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9/seed_from_u64(seed^case_index)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distortion {
    Identity,
    /// `g(p) = p^gamma`.
    Power { gamma: f64 },
    /// Logistic curve `σ(a (p − b))`, rescaled so that `g(0) = 0`, `g(1) = 1`.
    Logistic { a: f64, b: f64 },
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

impl Distortion {
    fn validate(&self) -> Result<()> {
        match *self {
            Distortion::Identity => Ok(()),
            Distortion::Power { gamma } if gamma > 0.0 && gamma.is_finite() => Ok(()),
            Distortion::Power { .. } => Err(Error::InvalidConfig("gamma must be positive")),
            Distortion::Logistic { a, b } if a > 0.0 && a.is_finite() && b.is_finite() => Ok(()),
            Distortion::Logistic { .. } => Err(Error::NonInvertibleDistortion),
        }
    }

    fn logistic_ends(a: f64, b: f64) -> (f64, f64) {
        (sigmoid(-a * b), sigmoid(a * (1.0 - b)))
    }

    pub fn apply(&self, p: f64) -> f64 {
        match *self {
            Distortion::Identity => p,
            Distortion::Power { gamma } => libm::pow(p, gamma),
            Distortion::Logistic { a, b } => {
                let (lo, hi) = Self::logistic_ends(a, b);
                ((sigmoid(a * (p - b)) - lo) / (hi - lo)).clamp(0.0, 1.0)
            }
        }
    }

    /// `g⁻¹(q)` for `q ∈ [0, 1]`.
    pub fn inverse(&self, q: f64) -> Result<f64> {
        self.validate()?;
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::OutOfRange(q));
        }
        Ok(match *self {
            Distortion::Identity => q,
            Distortion::Power { gamma } => libm::pow(q, 1.0 / gamma),
            Distortion::Logistic { a, b } => {
                let (lo, hi) = Self::logistic_ends(a, b);
                let s = lo + q * (hi - lo);
                (b + libm::log(s / (1.0 - s)) / a).clamp(0.0, 1.0)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RaterModel {
    /// Every voxel label is an independent `Bernoulli(p(x))` draw.
    Bernoulli,
    /// Rater `i` marks `p(x) ≥ τ_i`, with `τ_i ~ Normal(0.5, sigma)` clipped
    /// into (0, 1). Thresholds are drawn once per dataset, so each rater has
    /// a persistent bias shared by all cases.
    ThresholdJitter { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub dims: [usize; 3],
    pub n_raters: usize,
    pub n_cases: usize,
    /// The first `calibration_cases` cases form the calibration split, the
    /// rest the test split.
    pub calibration_cases: usize,
    /// Inclusive range of lesion blobs per case.
    pub lesion_count_range: [usize; 2],
    pub distortion: Distortion,
    pub rater_model: RaterModel,
    /// Standard deviation of Gaussian noise added to predictions (then clipped).
    #[serde(default)]
    pub prediction_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dims: [32, 32, 32],
            n_raters: 5,
            n_cases: 10,
            calibration_cases: 5,
            lesion_count_range: [1, 3],
            distortion: Distortion::Identity,
            rater_model: RaterModel::Bernoulli,
            prediction_noise: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::InvalidConfig("dims must be positive"));
        }
        if self.n_raters == 0 || self.n_cases == 0 {
            return Err(Error::InvalidConfig("rater and case counts must be positive"));
        }
        if self.calibration_cases > self.n_cases {
            return Err(Error::InvalidConfig("more calibration cases than cases"));
        }
        let [lo, hi] = self.lesion_count_range;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidConfig("lesion count range must be 1 ≤ min ≤ max"));
        }
        if let RaterModel::ThresholdJitter { sigma } = self.rater_model {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidConfig("threshold jitter must be non-negative"));
            }
        }
        if !(self.prediction_noise >= 0.0 && self.prediction_noise.is_finite()) {
            return Err(Error::InvalidConfig("prediction noise must be non-negative"));
        }
        match self.distortion.validate() {
            Err(Error::NonInvertibleDistortion) => {
                Err(Error::InvalidConfig("logistic slope must be positive"))
            }
            other => other,
        }
    }

    pub fn is_calibration(&self, case_index: usize) -> bool {
        case_index < self.calibration_cases
    }

    /// Per-rater thresholds for the threshold-jitter model.
    pub fn rater_thresholds(&self) -> Option<Vec<f64>> {
        let RaterModel::ThresholdJitter { sigma } = self.rater_model else {
            return None;
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        let normal = Normal::new(0.5, sigma).expect("validated sigma");
        Some(
            (0..self.n_raters)
                .map(|_| normal.sample(&mut rng).clamp(1e-6, 1.0 - 1e-6))
                .collect(),
        )
    }
}

/// `g⁻¹(q)` for the configured distortion.
pub fn true_inverse(config: &SynthConfig, q: f64) -> Result<f64> {
    config.distortion.inverse(q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCase {
    pub latent: Volume,
    pub prediction: Volume,
    pub raters: RaterSet,
}

struct Blob {
    center: [f64; 3],
    radius: f64,
    softness: f64,
    amplitude: f64,
}

fn latent_field(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let [d0, d1, d2] = config.dims;
    let min_dim = d0.min(d1).min(d2) as f64;
    let [lo, hi] = config.lesion_count_range;
    let count = rng.random_range(lo..=hi);
    let blobs: Vec<Blob> = (0..count)
        .map(|_| {
            let center = config
                .dims
                .map(|d| rng.random_range(0.2..=0.8) * d as f64);
            let radius = (rng.random_range(0.08..=0.18) * min_dim).max(1.0);
            let softness = (rng.random_range(0.15..=0.35) * radius).max(0.5);
            let amplitude = rng.random_range(0.7..=1.0);
            Blob {
                center,
                radius,
                softness,
                amplitude,
            }
        })
        .collect();

    let mut field = Vec::with_capacity(d0 * d1 * d2);
    for x in 0..d0 {
        for y in 0..d1 {
            for z in 0..d2 {
                let pos = [x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5];
                let p: f64 = blobs
                    .iter()
                    .map(|b| {
                        let d2: f64 = (0..3).map(|k| { let d = pos[k] - b.center[k]; d * d }).sum();
                        b.amplitude * sigmoid((b.radius - libm::sqrt(d2)) / b.softness)
                    })
                    .sum();
                field.push(p.min(1.0) as f32);
            }
        }
    }
    field
}

/// Generate case `index`; depends only on the config and the index.
pub fn generate_case(config: &SynthConfig, index: usize) -> Result<SynthCase> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ index as u64);
    let latent = latent_field(config, &mut rng);

    let masks: Vec<Vec<u8>> = match config.rater_model {
        RaterModel::Bernoulli => (0..config.n_raters)
            .map(|_| {
                latent
                    .iter()
                    .map(|&p| u8::from(rng.random::<f64>() < f64::from(p)))
                    .collect()
            })
            .collect(),
        RaterModel::ThresholdJitter { .. } => config
            .rater_thresholds()
            .expect("threshold model")
            .into_iter()
            .map(|tau| latent.iter().map(|&p| u8::from(f64::from(p) >= tau)).collect())
            .collect(),
    };

    let noise = if config.prediction_noise > 0.0 {
        Some(Normal::new(0.0, config.prediction_noise).expect("validated noise"))
    } else {
        None
    };
    let prediction: Vec<f32> = latent
        .iter()
        .map(|&p| {
            let mut q = config.distortion.apply(f64::from(p));
            if let Some(n) = &noise {
                q += n.sample(&mut rng);
            }
            q.clamp(0.0, 1.0) as f32
        })
        .collect();

    let spacing = [1.0; 3];
    let raters = masks
        .into_iter()
        .map(|m| Volume::mask(config.dims, spacing, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthCase {
        latent: Volume::probability(config.dims, spacing, latent)?,
        prediction: Volume::probability(config.dims, spacing, prediction)?,
        raters: RaterSet::new(raters)?,
    })
}

/// Generate every case of the dataset, in index order.
pub fn generate(config: &SynthConfig) -> Result<Vec<SynthCase>> {
    (0..config.n_cases)
        .map(|i| generate_case(config, i))
        .collect()
}

/// Empirical MHR against latent probability, in `bins` uniform latent bins:
/// `(mean latent, mean MHR, voxel count)` per occupied bin.
pub fn mhr_by_latent(cases: &[SynthCase], bins: usize) -> Vec<(f64, f64, usize)> {
    let mut sums = vec![(0.0, 0.0, 0usize); bins];
    for case in cases {
        let n = case.raters.rater_count() as f64;
        let cols = case.raters.label_columns();
        let latent = case.latent.probabilities().expect("float latent");
        for (v, &p) in latent.iter().enumerate() {
            let b = crate::binning::uniform_bin_index(f64::from(p), bins);
            let positives: u32 = cols.iter().map(|c| u32::from(c[v])).sum();
            sums[b].0 += f64::from(p);
            sums[b].1 += f64::from(positives) / n;
            sums[b].2 += 1;
        }
    }
    sums.into_iter()
        .filter(|s| s.2 > 0)
        .map(|(p, m, c)| (p / c as f64, m / c as f64, c))
        .collect()
}
