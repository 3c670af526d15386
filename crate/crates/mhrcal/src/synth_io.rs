//! Writing synthetic datasets to disk in the volume/manifest format.

use std::fs;
use std::path::Path;

use mhrcal_core::synth::{generate_case, SynthConfig, RNG_ALGORITHM};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifest::{CaseRecord, Manifest, Split};
use crate::volume_io::write_volume;

#[derive(Serialize)]
struct ConfigEcho<'a> {
    #[serde(flatten)]
    config: &'a SynthConfig,
    rng: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    rater_thresholds: Option<Vec<f64>>,
}

pub fn case_id(index: usize) -> String {
    format!("case_{index:03}")
}

/// Generate every case of `config` under `dir` and write `manifest.json`
/// and `synth_config.json`. Cases are generated in parallel; each depends
/// only on the seed and its index.
pub fn write_dataset(config: &SynthConfig, dir: &Path) -> Result<Manifest> {
    config.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let records = (0..config.n_cases)
        .into_par_iter()
        .map(|i| {
            let case = generate_case(config, i)?;
            let id = case_id(i);
            let case_dir = dir.join(&id);
            write_volume(&case.prediction, &case_dir.join("pred"))?;
            write_volume(&case.latent, &case_dir.join("latent"))?;
            let rater_paths = case
                .raters
                .volumes()
                .iter()
                .enumerate()
                .map(|(r, v)| {
                    write_volume(v, &case_dir.join(format!("rater_{r}")))?;
                    Ok(format!("{id}/rater_{r}.raw"))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CaseRecord {
                prediction_paths: vec![format!("{id}/pred.raw")],
                rater_paths,
                split: if config.is_calibration(i) {
                    Split::Calibration
                } else {
                    Split::Test
                },
                roi_path: None,
                case_id: id,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut manifest = Manifest::new(config.n_raters, records)?;
    manifest.generator = Some(RNG_ALGORITHM.to_owned());
    manifest.save(&dir.join("manifest.json"))?;
    manifest.set_base_dir(dir);

    let echo = ConfigEcho {
        config,
        rng: RNG_ALGORITHM,
        rater_thresholds: config.rater_thresholds(),
    };
    let path = dir.join("synth_config.json");
    fs::write(&path, serde_json::to_string_pretty(&echo).expect("config serializes"))
        .map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
