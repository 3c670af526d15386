//! Dense scalar fields on a 3-D voxel grid.
//!
//! Data is stored flat in row-major ("C") order. Probability maps are
//! `float32`, rater annotations are `uint8` holding only 0 or 1.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Float32,
    Uint8,
}

impl Dtype {
    pub fn name(self) -> &'static str {
        match self {
            Dtype::Float32 => "float32",
            Dtype::Uint8 => "uint8",
        }
    }

    pub fn size_bytes(self) -> usize {
        match self {
            Dtype::Float32 => 4,
            Dtype::Uint8 => 1,
        }
    }
}

/// What a volume is used for; decides which value checks apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Probability,
    Annotation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeHeader {
    dims: [usize; 3],
    dtype: Dtype,
    spacing: [f64; 3],
}

impl VolumeHeader {
    pub fn new(dims: [usize; 3], dtype: Dtype, spacing: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::BadHeader("every dimension must be positive"));
        }
        if dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .is_none()
        {
            return Err(Error::BadHeader("voxel count overflows"));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::BadHeader("spacing must be finite and positive"));
        }
        Ok(Self {
            dims,
            dtype,
            spacing,
        })
    }

    pub fn with_unit_spacing(dims: [usize; 3], dtype: Dtype) -> Result<Self> {
        Self::new(dims, dtype, [1.0; 3])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    /// Physical volume of a single voxel.
    pub fn voxel_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn payload_bytes(&self) -> usize {
        self.voxel_count() * self.dtype.size_bytes()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VolumeData {
    F32(Vec<f32>),
    U8(Vec<u8>),
}

impl VolumeData {
    pub fn len(&self) -> usize {
        match self {
            VolumeData::F32(v) => v.len(),
            VolumeData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            VolumeData::F32(_) => Dtype::Float32,
            VolumeData::U8(_) => Dtype::Uint8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    header: VolumeHeader,
    data: VolumeData,
}

impl Volume {
    pub fn new(header: VolumeHeader, data: VolumeData) -> Result<Self> {
        if header.dtype() != data.dtype() {
            return Err(Error::BadDtype {
                expected: header.dtype().name(),
                found: data.dtype().name(),
            });
        }
        if header.voxel_count() != data.len() {
            return Err(Error::LengthMismatch {
                expected: header.voxel_count(),
                actual: data.len(),
            });
        }
        Ok(Self { header, data })
    }

    /// Float32 probability map; every value must lie in [0, 1].
    pub fn probability(dims: [usize; 3], spacing: [f64; 3], data: Vec<f32>) -> Result<Self> {
        let v = Self::new(
            VolumeHeader::new(dims, Dtype::Float32, spacing)?,
            VolumeData::F32(data),
        )?;
        v.validate(Role::Probability)?;
        Ok(v)
    }

    /// Uint8 annotation mask; every value must be 0 or 1.
    pub fn mask(dims: [usize; 3], spacing: [f64; 3], data: Vec<u8>) -> Result<Self> {
        let v = Self::new(
            VolumeHeader::new(dims, Dtype::Uint8, spacing)?,
            VolumeData::U8(data),
        )?;
        v.validate(Role::Annotation)?;
        Ok(v)
    }

    pub fn header(&self) -> &VolumeHeader {
        &self.header
    }

    pub fn dims(&self) -> [usize; 3] {
        self.header.dims
    }

    pub fn data(&self) -> &VolumeData {
        &self.data
    }

    pub fn into_data(self) -> VolumeData {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn probabilities(&self) -> Result<&[f32]> {
        match &self.data {
            VolumeData::F32(v) => Ok(v),
            VolumeData::U8(_) => Err(Error::BadDtype {
                expected: "float32",
                found: "uint8",
            }),
        }
    }

    pub fn labels(&self) -> Result<&[u8]> {
        match &self.data {
            VolumeData::U8(v) => Ok(v),
            VolumeData::F32(_) => Err(Error::BadDtype {
                expected: "uint8",
                found: "float32",
            }),
        }
    }

    /// Value at `index` widened to f64.
    pub fn value(&self, index: usize) -> f64 {
        match &self.data {
            VolumeData::F32(v) => f64::from(v[index]),
            VolumeData::U8(v) => f64::from(v[index]),
        }
    }

    /// Check the value constraints that `role` imposes.
    ///
    /// Probability volumes may be float32 in [0, 1] (NaN rejected) or uint8
    /// with values 0/1. Annotations must be uint8 0/1.
    pub fn validate(&self, role: Role) -> Result<()> {
        match (&self.data, role) {
            (VolumeData::F32(v), Role::Probability) => {
                match v.iter().position(|x| !(0.0..=1.0).contains(x)) {
                    Some(index) => Err(Error::ValueOutOfRange {
                        index,
                        value: f64::from(v[index]),
                    }),
                    None => Ok(()),
                }
            }
            (VolumeData::U8(v), _) => match v.iter().position(|&x| x > 1) {
                Some(index) if role == Role::Annotation => Err(Error::NonBinaryAnnotation {
                    index,
                    value: f64::from(v[index]),
                }),
                Some(index) => Err(Error::ValueOutOfRange {
                    index,
                    value: f64::from(v[index]),
                }),
                None => Ok(()),
            },
            (VolumeData::F32(_), Role::Annotation) => Err(Error::BadDtype {
                expected: "uint8",
                found: "float32",
            }),
        }
    }

    /// Clamp a float32 volume into [0, 1] in place; NaN becomes 0.
    /// Returns how many voxels changed.
    pub fn clamp_probabilities(&mut self) -> usize {
        let VolumeData::F32(v) = &mut self.data else {
            return 0;
        };
        let mut changed = 0;
        for x in v.iter_mut() {
            let c = if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
            if c.to_bits() != x.to_bits() {
                *x = c;
                changed += 1;
            }
        }
        changed
    }

    /// Float32 copy of this volume; uint8 values are widened.
    pub fn to_f32(&self) -> Vec<f32> {
        match &self.data {
            VolumeData::F32(v) => v.clone(),
            VolumeData::U8(v) => v.iter().map(|&x| f32::from(x)).collect(),
        }
    }

    pub(crate) fn check_aligned(&self, other: &Volume) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimsMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    /// New float32 volume sharing this header's dims and spacing.
    pub(crate) fn derive_f32(&self, data: Vec<f32>) -> Volume {
        let header = VolumeHeader {
            dtype: Dtype::Float32,
            ..self.header
        };
        Volume {
            header,
            data: VolumeData::F32(data),
        }
    }
}

/// The N aligned binary annotations of one case.
#[derive(Debug, Clone, PartialEq)]
pub struct RaterSet {
    raters: Vec<Volume>,
}

impl RaterSet {
    pub fn new(raters: Vec<Volume>) -> Result<Self> {
        let first = raters.first().ok_or(Error::EmptyInput)?;
        for r in &raters {
            first.check_aligned(r)?;
            r.validate(Role::Annotation)?;
        }
        Ok(Self { raters })
    }

    pub fn rater_count(&self) -> usize {
        self.raters.len()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.raters[0].dims()
    }

    pub fn header(&self) -> &VolumeHeader {
        self.raters[0].header()
    }

    pub fn voxel_count(&self) -> usize {
        self.raters[0].len()
    }

    pub fn volumes(&self) -> &[Volume] {
        &self.raters
    }

    /// Label slices, one per rater.
    pub fn label_columns(&self) -> Vec<&[u8]> {
        self.raters
            .iter()
            .map(|r| r.labels().expect("validated on construction"))
            .collect()
    }

    pub(crate) fn check_aligned(&self, v: &Volume) -> Result<()> {
        self.raters[0].check_aligned(v)
    }
}
