use mhrcal_core::binning::uniform_bin_index;
use mhrcal_core::metrics::{crps_gaussian, wasserstein1};
use mhrcal_core::{
    bootstrap_ci, build_map, equal_mass_bins, pava, pool_ensemble, uniform_bins, Volume,
};
use proptest::prelude::*;

fn targets_weights(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_len).prop_flat_map(|m| {
        (
            prop::collection::vec(0.0f64..=1.0, m),
            prop::collection::vec(0.01f64..10.0, m),
        )
    })
}

fn is_monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] <= w[1])
}

proptest! {
    #[test]
    fn pava_is_monotone_and_preserves_mass((t, w) in targets_weights(40)) {
        let fit = pava(&t, &w).unwrap();
        prop_assert!(is_monotone(&fit.block_values));
        let lhs: f64 = t.iter().zip(&w).map(|(a, b)| a * b).sum();
        let rhs: f64 = fit.block_values.iter().zip(&w).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() < 1e-9);
        prop_assert_eq!(fit.blocks.first().unwrap().start, 0);
        prop_assert_eq!(fit.blocks.last().unwrap().end, t.len());
    }

    #[test]
    fn pava_is_idempotent((t, w) in targets_weights(40)) {
        let once = pava(&t, &w).unwrap();
        let twice = pava(&once.block_values, &w).unwrap();
        for (a, b) in once.block_values.iter().zip(&twice.block_values) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pava_ignores_weight_scale((t, w) in targets_weights(30), scale in 0.01f64..100.0) {
        let a = pava(&t, &w).unwrap();
        let scaled: Vec<f64> = w.iter().map(|x| x * scale).collect();
        let b = pava(&t, &scaled).unwrap();
        prop_assert_eq!(&a.blocks, &b.blocks);
        for (x, y) in a.block_values.iter().zip(&b.block_values) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn pava_beats_every_monotone_candidate((t, w) in targets_weights(12), seed in any::<u64>()) {
        // Any sorted vector is feasible, so none may have a lower objective.
        let fit = pava(&t, &w).unwrap();
        let mut cand: Vec<f64> = t.iter().enumerate()
            .map(|(i, x)| (x + (seed.rotate_left(i as u32) % 1000) as f64 / 1000.0) / 2.0)
            .collect();
        cand.sort_by(f64::total_cmp);
        let obj: f64 = cand.iter().zip(&t).zip(&w).map(|((c, y), w)| w * (c - y) * (c - y)).sum();
        prop_assert!(fit.objective <= obj + 1e-12);
    }

    #[test]
    fn fitted_maps_are_monotone(
        preds in prop::collection::vec(0.0f32..=1.0, 20..200),
        labels_seed in any::<u64>(),
        bins in 1usize..20,
        probes in prop::collection::vec(0.0f64..=1.0, 2..50),
    ) {
        let labels: Vec<u8> = (0..preds.len())
            .map(|i| ((labels_seed >> (i % 64)) & 1) as u8)
            .collect();
        let bins = bins.min(preds.len());
        let stats = equal_mass_bins(&preds, &[&labels], bins).unwrap();
        let fit = pava(&stats.mhr_rate, &stats.weights).unwrap();
        let map = build_map(&stats, &fit).unwrap();
        let mut probes = probes;
        probes.sort_by(f64::total_cmp);
        let out: Vec<f64> = probes.iter().map(|&p| map.evaluate(p).unwrap()).collect();
        prop_assert!(is_monotone(&out));
        prop_assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn equal_mass_bins_ignore_voxel_order(
        n in 10usize..200,
        bins in 1usize..10,
        seed in any::<u64>(),
        rotate in 0usize..200,
    ) {
        // Distinct prediction values, so the sorted order is unique.
        let preds: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed % 97) % 1009) as f64 / 1009.0 + i as f64 * 1e-9).collect();
        let labels: Vec<u8> = (0..n).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
        let k = rotate % n;
        let mut p2 = preds.clone();
        let mut l2 = labels.clone();
        p2.rotate_left(k);
        l2.rotate_left(k);
        let a = equal_mass_bins(&preds, &[&labels], bins).unwrap();
        let b = equal_mass_bins(&p2, &[&l2], bins).unwrap();
        prop_assert_eq!(&a.counts, &b.counts);
        prop_assert_eq!(&a.mhr_rate, &b.mhr_rate);
        for (x, y) in a.mean_confidence.iter().zip(&b.mean_confidence) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn bin_aggregates_recover_global_means(
        preds in prop::collection::vec(0.0f32..=1.0, 1..300),
        seed in any::<u64>(),
        bins in 1usize..60,
    ) {
        let n = preds.len();
        let r0: Vec<u8> = (0..n).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
        let r1: Vec<u8> = (0..n).map(|i| ((seed >> ((i + 17) % 64)) & 1) as u8).collect();
        let mean_p: f64 = preds.iter().map(|&p| f64::from(p)).sum::<f64>() / n as f64;
        let mean_y: f64 = r0.iter().chain(&r1).map(|&y| f64::from(y)).sum::<f64>() / (2 * n) as f64;
        for stats in [
            uniform_bins(&preds, &[&r0, &r1], bins).unwrap(),
            equal_mass_bins(&preds, &[&r0, &r1], bins.min(n)).unwrap(),
        ] {
            let w: f64 = stats.weights.iter().sum();
            let c: f64 = stats.weights.iter().zip(&stats.mean_confidence).map(|(w, c)| w * c).sum();
            let y: f64 = stats.weights.iter().zip(&stats.mhr_rate).map(|(w, y)| w * y).sum();
            prop_assert!((w - 1.0).abs() < 1e-12);
            prop_assert!((c - mean_p).abs() < 1e-9);
            prop_assert!((y - mean_y).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_index_is_in_range(p in 0.0f64..=1.0, bins in 1usize..500) {
        let b = uniform_bin_index(p, bins);
        prop_assert!(b < bins);
        prop_assert!(b as f64 / bins as f64 <= p);
    }

    #[test]
    fn wasserstein_is_a_metric(
        a in prop::collection::vec(-100.0f64..100.0, 1..20),
        b in prop::collection::vec(-100.0f64..100.0, 1..20),
        c in prop::collection::vec(-100.0f64..100.0, 1..20),
    ) {
        let ab = wasserstein1(&a, &b).unwrap();
        let ba = wasserstein1(&b, &a).unwrap();
        let ac = wasserstein1(&a, &c).unwrap();
        let cb = wasserstein1(&c, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert!(ab <= ac + cb + 1e-9);
        prop_assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn crps_is_translation_invariant(
        x in -50.0f64..50.0, mu in -50.0f64..50.0, sigma in 0.0f64..20.0, c in -50.0f64..50.0,
    ) {
        let a = crps_gaussian(x, mu, sigma).unwrap();
        let b = crps_gaussian(x + c, mu + c, sigma).unwrap();
        prop_assert!(a >= 0.0);
        // Shifting by c rounds x and mu independently, which perturbs z by
        // up to a few ulps of |c|.
        prop_assert!((a - b).abs() <= 1e-12 + 4.0 * f64::EPSILON * (c.abs() + x.abs() + mu.abs()));
    }

    #[test]
    fn bootstrap_interval_contains_mean(
        values in prop::collection::vec(-10.0f64..10.0, 1..30),
        seed in any::<u64>(),
    ) {
        let iv = bootstrap_ci(&values, 200, seed, 0.95).unwrap();
        prop_assert!(iv.lo <= iv.mean && iv.mean <= iv.hi);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min <= iv.lo && iv.hi <= max);
    }

    #[test]
    fn pooling_is_permutation_invariant(
        members in prop::collection::vec(prop::collection::vec(0.0f32..=1.0, 6), 1..6),
        rotate in 0usize..6,
    ) {
        let vols: Vec<Volume> = members
            .iter()
            .map(|d| Volume::probability([3, 2, 1], [1.0; 3], d.clone()).unwrap())
            .collect();
        let mut rotated = vols.clone();
        rotated.rotate_left(rotate % vols.len());
        let a = pool_ensemble(&vols).unwrap();
        let b = pool_ensemble(&rotated).unwrap();
        prop_assert_eq!(a.probabilities().unwrap(), b.probabilities().unwrap());
    }
}
