use std::path::PathBuf;

use mhrcal::core::{Role, Volume};
use mhrcal::volume_io::{read_volume, write_volume};
use mhrcal::{load_manifest, write_dataset, Manifest, Split};
use mhrcal_core::synth::SynthConfig;
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn golden_little_endian_float32() {
    let v = read_volume(&fixture("golden_f32.raw"), Role::Probability).unwrap();
    assert_eq!(v.dims(), [2, 2, 1]);
    assert_eq!(v.header().spacing(), [0.5, 0.5, 2.0]);
    assert_eq!(v.probabilities().unwrap(), &[0.0, 0.5, 1.0, 0.25]);

    let dir = tempfile::tempdir().unwrap();
    write_volume(&v, &dir.path().join("copy")).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("copy.raw")).unwrap(),
        std::fs::read(fixture("golden_f32.raw")).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn float_volumes_roundtrip_bitwise(
        (dims, data) in (1usize..6, 1usize..6, 1usize..6).prop_flat_map(|d| {
            (Just(d), prop::collection::vec(0.0f32..=1.0, d.0 * d.1 * d.2))
        }),
    ) {
        let v = Volume::probability([dims.0, dims.1, dims.2], [1.0, 0.5, 2.5], data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.raw");
        write_volume(&v, &p).unwrap();
        let back = read_volume(&p, Role::Probability).unwrap();
        prop_assert_eq!(back, v);
    }

    #[test]
    fn masks_roundtrip(bits in prop::collection::vec(0u8..=1, 1..64)) {
        let n = bits.len();
        let v = Volume::mask([n, 1, 1], [1.0; 3], bits).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m");
        write_volume(&v, &p).unwrap();
        prop_assert_eq!(read_volume(&p, Role::Annotation).unwrap(), v);
    }
}

#[test]
fn synthetic_datasets_are_deterministic() {
    let config = SynthConfig {
        dims: [8, 8, 8],
        n_cases: 3,
        calibration_cases: 2,
        seed: 42,
        ..SynthConfig::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_dataset(&config, a.path()).unwrap();
    write_dataset(&config, b.path()).unwrap();
    for file in ["manifest.json", "synth_config.json", "case_000/pred.raw", "case_002/rater_4.raw", "case_001/latent.json"] {
        assert_eq!(
            std::fs::read(a.path().join(file)).unwrap(),
            std::fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
    let m: Manifest = load_manifest(&a.path().join("manifest.json")).unwrap();
    assert_eq!(m.rater_count, 5);
    assert_eq!(m.cases_in(Split::Calibration).count(), 2);
    let test = m.load_split(Split::Test, Default::default()).unwrap();
    assert_eq!(test[0].case_id, "case_002");
    assert_eq!(test[0].raters.rater_count(), 5);
}
