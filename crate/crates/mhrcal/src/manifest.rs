//! Multi-case dataset manifests.
//!
//! ```json
//! {"format_version":"1","rater_count":5,
//!  "cases":[{"case_id":"c0","prediction_paths":["c0/pred.raw"],
//!            "rater_paths":["c0/rater_0.raw", ...],"split":"calibration"}]}
//! ```
//!
//! Relative paths resolve against the manifest's directory. Cross-case
//! invariants are checked on load; volume dims are checked when a case is
//! loaded.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use mhrcal_core::{pool_ensemble, RaterSet, Role, Volume};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::volume_io::{read_probability, read_volume};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Calibration,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Calibration => "calibration",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub prediction_paths: Vec<String>,
    pub rater_paths: Vec<String>,
    pub split: Split,
    /// Optional uint8 mask restricting which voxels are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roi_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: String,
    pub rater_count: usize,
    pub cases: Vec<CaseRecord>,
    /// Generator identifier for synthetic datasets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(skip)]
    base_dir: PathBuf,
}

/// A case read from disk: ensemble members pooled into one prediction.
#[derive(Debug, Clone)]
pub struct LoadedCase {
    pub case_id: String,
    pub prediction: Volume,
    pub raters: RaterSet,
    pub roi: Option<Volume>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Clamp out-of-range probabilities instead of failing.
    pub clamp: bool,
}

impl Manifest {
    pub fn new(rater_count: usize, cases: Vec<CaseRecord>) -> Result<Self> {
        let m = Self {
            format_version: FORMAT_VERSION.to_owned(),
            rater_count,
            cases,
            generator: None,
            base_dir: PathBuf::new(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported manifest format_version {:?}",
                self.format_version
            )));
        }
        if self.rater_count == 0 {
            return Err(Error::Invalid("rater_count must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for case in &self.cases {
            if !seen.insert(case.case_id.as_str()) {
                return Err(Error::DuplicateCaseId(case.case_id.clone()));
            }
            if case.rater_paths.len() != self.rater_count {
                return Err(Error::RaterCountMismatch {
                    case_id: case.case_id.clone(),
                    expected: self.rater_count,
                    actual: case.rater_paths.len(),
                });
            }
            if case.prediction_paths.is_empty() {
                return Err(Error::Invalid(format!(
                    "case {:?} has no prediction paths",
                    case.case_id
                )));
            }
        }
        Ok(())
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = dir.into();
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        self.base_dir.join(path)
    }

    pub fn cases_in(&self, split: Split) -> impl Iterator<Item = &CaseRecord> {
        self.cases.iter().filter(move |c| c.split == split)
    }

    pub fn load_case(&self, record: &CaseRecord, options: LoadOptions) -> Result<LoadedCase> {
        let members = record
            .prediction_paths
            .iter()
            .map(|p| read_probability(&self.resolve(p), options.clamp))
            .collect::<Result<Vec<_>>>()?;
        let prediction = pool_ensemble(&members)?;
        let raters = record
            .rater_paths
            .iter()
            .map(|p| read_volume(&self.resolve(p), Role::Annotation))
            .collect::<Result<Vec<_>>>()?;
        let raters = RaterSet::new(raters)?;
        if raters.dims() != prediction.dims() {
            return Err(mhrcal_core::Error::DimsMismatch {
                left: prediction.dims(),
                right: raters.dims(),
            }
            .into());
        }
        let roi = record
            .roi_path
            .as_deref()
            .map(|p| read_volume(&self.resolve(p), Role::Annotation))
            .transpose()?;
        Ok(LoadedCase {
            case_id: record.case_id.clone(),
            prediction,
            raters,
            roi,
        })
    }

    /// Load every case of `split` in manifest order (reads run in parallel).
    pub fn load_split(&self, split: Split, options: LoadOptions) -> Result<Vec<LoadedCase>> {
        let records: Vec<&CaseRecord> = self.cases_in(split).collect();
        if records.is_empty() {
            return Err(Error::EmptySplit(split));
        }
        records
            .par_iter()
            .map(|r| self.load_case(r, options))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

/// Parse and validate a manifest file.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    manifest.validate()?;
    manifest.set_base_dir(path.parent().unwrap_or(Path::new("")));
    Ok(manifest)
}

/// SHA-256 of the manifest file contents, hex-encoded.
pub fn manifest_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
