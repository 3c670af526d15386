use mhrcal_core::metrics::{crps_case, crps_gaussian, ece_against_mhr, tdsc};
use mhrcal_core::synth::{generate, generate_case, mhr_by_latent, Distortion, RaterModel, SynthConfig};
use mhrcal_core::{
    fit, mean_human_response, CalibrationCase, FitOptions, RaterSet, TargetKind, TargetSpec, Volume,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn phi_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

/// ∫ (F(t) − 1{t ≥ x})² dt for F = Normal(mu, sigma), by the trapezoid rule
/// on each side of x.
fn crps_by_integration(x: f64, mu: f64, sigma: f64, steps: usize) -> f64 {
    let lo = (mu - 12.0 * sigma).min(x);
    let hi = (mu + 12.0 * sigma).max(x);
    let trapezoid = |a: f64, b: f64, f: &dyn Fn(f64) -> f64| {
        if b <= a {
            return 0.0;
        }
        let h = (b - a) / steps as f64;
        let mut s = 0.5 * (f(a) + f(b));
        for k in 1..steps {
            s += f(a + k as f64 * h);
        }
        s * h
    };
    let left = |t: f64| phi_cdf((t - mu) / sigma).powi(2);
    let right = |t: f64| (1.0 - phi_cdf((t - mu) / sigma)).powi(2);
    trapezoid(lo, x, &left) + trapezoid(x, hi, &right)
}

#[test]
fn crps_matches_integration_at_reference_points() {
    let c = crps_gaussian(0.0, 0.0, 1.0).unwrap();
    assert!((c - 0.23369).abs() < 5e-6, "{c}");
    assert!((c - crps_by_integration(0.0, 0.0, 1.0, 200_000)).abs() < 1e-8);
    for sigma in [0.5, 3.0, 40.0] {
        let expected = sigma * (2.0 / (2.0 * std::f64::consts::PI).sqrt() - 1.0 / std::f64::consts::PI.sqrt());
        assert!((crps_gaussian(7.0, 7.0, sigma).unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn crps_case_from_rater_volumes() {
    // Two raters with volumes 90 and 110, prediction volume exactly 100.
    let n = 200;
    let r0: Vec<u8> = (0..n).map(|i| u8::from(i < 90)).collect();
    let r1: Vec<u8> = (0..n).map(|i| u8::from(i < 110)).collect();
    let raters = RaterSet::new(vec![
        Volume::mask([n, 1, 1], [1.0; 3], r0).unwrap(),
        Volume::mask([n, 1, 1], [1.0; 3], r1).unwrap(),
    ])
    .unwrap();
    let pred = Volume::probability([n, 1, 1], [1.0; 3], (0..n).map(|i| if i < 100 { 1.0 } else { 0.0 }).collect()).unwrap();
    let sigma = 200f64.sqrt();
    let got = crps_case(&pred, &raters).unwrap();
    assert!((got - crps_by_integration(100.0, 100.0, sigma, 400_000)).abs() < 1e-6);
    assert!((got - crps_gaussian(100.0, 100.0, sigma).unwrap()).abs() < 1e-12);
}

/// Dice of the threshold masks, enumerated voxel by voxel.
fn tdsc_by_enumeration(pred: &[f64], mhr: &[f64], thresholds: &[f64]) -> f64 {
    let mut total = 0.0;
    for &t in thresholds {
        let a: Vec<usize> = (0..pred.len()).filter(|&i| pred[i] >= t).collect();
        let b: Vec<usize> = (0..mhr.len()).filter(|&i| mhr[i] >= t).collect();
        let inter = a.iter().filter(|i| b.contains(i)).count();
        total += if a.is_empty() && b.is_empty() {
            1.0
        } else {
            2.0 * inter as f64 / (a.len() + b.len()) as f64
        };
    }
    total / thresholds.len() as f64
}

#[test]
fn tdsc_four_voxel_example() {
    let p = [0.2, 0.4, 0.6, 0.8];
    let m = [0.0, 0.6, 0.4, 1.0];
    let th = [0.25, 0.5, 0.75];
    let pv = Volume::probability([4, 1, 1], [1.0; 3], p.iter().map(|&x| x as f32).collect()).unwrap();
    let mv = Volume::probability([4, 1, 1], [1.0; 3], m.iter().map(|&x| x as f32).collect()).unwrap();
    let expected = tdsc_by_enumeration(&p, &m, &th);
    assert!((expected - 2.5 / 3.0).abs() < 1e-15);
    assert!((tdsc(&pv, &mv, &th).unwrap() - expected).abs() < 1e-15);
}

#[test]
fn tdsc_matches_enumeration_on_random_volumes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let th = [0.1, 0.3, 0.5, 0.7, 0.9];
    for _ in 0..50 {
        let n = rng.random_range(1..40);
        // Values on a 1/8 grid, so f32 storage is exact.
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0..=8) as f64 / 8.0).collect();
        let m: Vec<f64> = (0..n).map(|_| rng.random_range(0..=8) as f64 / 8.0).collect();
        let pv = Volume::probability([n, 1, 1], [1.0; 3], p.iter().map(|&x| x as f32).collect()).unwrap();
        let mv = Volume::probability([n, 1, 1], [1.0; 3], m.iter().map(|&x| x as f32).collect()).unwrap();
        let got = tdsc(&pv, &mv, &th).unwrap();
        assert!((got - tdsc_by_enumeration(&p, &m, &th)).abs() < 1e-12);
    }
}

#[test]
fn bernoulli_raters_follow_latent_probability() {
    let config = SynthConfig {
        dims: [24, 24, 24],
        n_raters: 7,
        n_cases: 4,
        calibration_cases: 4,
        ..SynthConfig::default()
    };
    let cases = generate(&config).unwrap();
    for (latent, mhr, count) in mhr_by_latent(&cases, 20) {
        if count < 50 {
            continue;
        }
        let draws = (count * config.n_raters) as f64;
        let sd = (latent * (1.0 - latent) / draws).sqrt();
        // Bin-average latent differs from each voxel's p, so allow the
        // within-bin spread (half a bin width) on top of 4 sigma.
        assert!((mhr - latent).abs() <= 4.0 * sd + 0.025, "latent {latent} mhr {mhr} n {count}");
    }
}

#[test]
fn threshold_raters_are_nested_by_threshold() {
    let config = SynthConfig {
        dims: [16, 16, 16],
        n_raters: 4,
        n_cases: 2,
        calibration_cases: 1,
        rater_model: RaterModel::ThresholdJitter { sigma: 0.1 },
        seed: 3,
        ..SynthConfig::default()
    };
    let tau = config.rater_thresholds().unwrap();
    let case = generate_case(&config, 1).unwrap();
    let latent = case.latent.probabilities().unwrap();
    for (i, v) in case.raters.volumes().iter().enumerate() {
        for (x, &y) in v.labels().unwrap().iter().enumerate() {
            assert_eq!(y == 1, f64::from(latent[x]) >= tau[i]);
        }
    }
}

#[test]
fn distortions_invert() {
    for d in [
        Distortion::Identity,
        Distortion::Power { gamma: 1.5 },
        Distortion::Logistic { a: 8.0, b: 0.4 },
    ] {
        for k in 0..=100 {
            let p = k as f64 / 100.0;
            assert!((d.inverse(d.apply(p)).unwrap() - p).abs() < 1e-9, "{d:?} at {p}");
        }
    }
}

fn random_raters(rng: &mut ChaCha8Rng, n: usize, voxels: usize) -> RaterSet {
    let vols = (0..n)
        .map(|_| {
            let d = (0..voxels).map(|_| u8::from(rng.random_bool(0.4))).collect();
            Volume::mask([voxels, 1, 1], [1.0; 3], d).unwrap()
        })
        .collect();
    RaterSet::new(vols).unwrap()
}

#[test]
fn fitting_the_mhr_to_itself_gives_the_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let raters = random_raters(&mut rng, 5, 5000);
    let pred = mean_human_response(&raters);
    let bundle = fit(
        &[CalibrationCase::new(&pred, &raters)],
        &TargetSpec::new(TargetKind::Mhr).with_bins(40),
        &FitOptions::default(),
    )
    .unwrap();
    let map = &bundle.maps()[0];
    let xs = map.breakpoints_x();
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    for k in 0..=200 {
        let p = lo + (hi - lo) * k as f64 / 200.0;
        assert!((map.evaluate(p).unwrap() - p).abs() < 1e-6, "at {p}");
    }
    let calibrated = bundle.apply(&pred).unwrap();
    assert!(ece_against_mhr(&calibrated, &raters, 50).unwrap() <= 1.0 / 50.0);
}

#[test]
fn single_rater_targets_coincide() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let raters = random_raters(&mut rng, 1, 3000);
    let pred = Volume::probability([3000, 1, 1], [1.0; 3], (0..3000).map(|_| rng.random::<f32>()).collect()).unwrap();
    let case = [CalibrationCase::new(&pred, &raters)];
    let maps: Vec<_> = [TargetKind::Mhr, TargetKind::SingleRater { rater: 0 }, TargetKind::HardLabel]
        .into_iter()
        .map(|k| fit(&case, &TargetSpec::new(k).with_bins(50), &FitOptions::default()).unwrap().maps().to_vec())
        .collect();
    assert_eq!(maps[0], maps[1]);
    assert_eq!(maps[0], maps[2]);
}
