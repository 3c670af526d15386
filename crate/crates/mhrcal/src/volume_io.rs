//! Raw volume format: a little-endian row-major payload `<name>.raw` next
//! to a JSON sidecar `<name>.json`:
//!
//! ```json
//! {"dims":[x,y,z],"dtype":"float32","order":"C","spacing":[sx,sy,sz]}
//! ```
//!
//! Either file's path (or the bare stem) may be passed to the functions here.

use std::fs;
use std::path::{Path, PathBuf};

use mhrcal_core::{Dtype, Role, Volume, VolumeData, VolumeHeader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    dims: [usize; 3],
    dtype: String,
    #[serde(default = "c_order")]
    order: String,
    #[serde(default = "unit_spacing")]
    spacing: [f64; 3],
}

fn c_order() -> String {
    "C".to_owned()
}

fn unit_spacing() -> [f64; 3] {
    [1.0; 3]
}

pub fn payload_path(path: &Path) -> PathBuf {
    path.with_extension("raw")
}

pub fn header_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn parse_dtype(name: &str) -> Result<Dtype> {
    match name {
        "float32" => Ok(Dtype::Float32),
        "uint8" => Ok(Dtype::Uint8),
        other => Err(Error::BadDtype(other.to_owned())),
    }
}

pub fn read_header(path: &Path) -> Result<VolumeHeader> {
    let hpath = header_path(path);
    let text = match fs::read_to_string(&hpath) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingHeader(hpath))
        }
        Err(e) => return Err(Error::io(hpath, e)),
    };
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| Error::parse(&hpath, e))?;
    if sidecar.order != "C" {
        return Err(Error::parse(&hpath, "only row-major order \"C\" is supported"));
    }
    let dtype = parse_dtype(&sidecar.dtype)?;
    Ok(VolumeHeader::new(sidecar.dims, dtype, sidecar.spacing)?)
}

/// Read a volume without any value checks.
pub fn read_volume_raw(path: &Path) -> Result<Volume> {
    let header = read_header(path)?;
    let ppath = payload_path(path);
    let bytes = fs::read(&ppath).map_err(|e| Error::io(&ppath, e))?;
    if bytes.len() != header.payload_bytes() {
        return Err(Error::SizeMismatch {
            path: ppath,
            expected: header.payload_bytes(),
            actual: bytes.len(),
        });
    }
    let data = match header.dtype() {
        Dtype::Uint8 => VolumeData::U8(bytes),
        Dtype::Float32 => VolumeData::F32(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
    };
    Ok(Volume::new(header, data)?)
}

/// Read a volume and check the constraints of `role`.
pub fn read_volume(path: &Path, role: Role) -> Result<Volume> {
    let v = read_volume_raw(path)?;
    v.validate(role)?;
    Ok(v)
}

/// Read a probability volume, clamping out-of-range values (NaN → 0)
/// instead of rejecting them when `clamp` is set.
pub fn read_probability(path: &Path, clamp: bool) -> Result<Volume> {
    if !clamp {
        return read_volume(path, Role::Probability);
    }
    let mut v = read_volume_raw(path)?;
    let changed = v.clamp_probabilities();
    if changed > 0 {
        log::warn!(
            "{}: clamped {changed} probability values into [0, 1]",
            path.display()
        );
    }
    v.validate(Role::Probability)?;
    Ok(v)
}

/// Write payload and sidecar. Float32 volumes are checked as probabilities
/// and uint8 volumes as annotations before anything is written.
pub fn write_volume(v: &Volume, path: &Path) -> Result<()> {
    let role = match v.data() {
        VolumeData::F32(_) => Role::Probability,
        VolumeData::U8(_) => Role::Annotation,
    };
    v.validate(role)?;
    let h = v.header();
    let sidecar = Sidecar {
        dims: h.dims(),
        dtype: h.dtype().name().to_owned(),
        order: c_order(),
        spacing: h.spacing(),
    };
    let payload: Vec<u8> = match v.data() {
        VolumeData::U8(d) => d.clone(),
        VolumeData::F32(d) => d.iter().flat_map(|x| x.to_le_bytes()).collect(),
    };
    let ppath = payload_path(path);
    let hpath = header_path(path);
    if let Some(dir) = ppath.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&ppath, payload).map_err(|e| Error::io(&ppath, e))?;
    let json = serde_json::to_string(&sidecar).expect("sidecar serializes");
    fs::write(&hpath, json).map_err(|e| Error::io(&hpath, e))?;
    Ok(())
}
