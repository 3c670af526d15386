use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,
    #[error("weight at index {index} is not strictly positive ({value})")]
    NonpositiveWeight { index: usize, value: f64 },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("{voxels} voxels cannot fill {bins} equal-mass bins")]
    TooFewVoxels { voxels: usize, bins: usize },
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("value {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("values must be nondecreasing (violation at index {0})")]
    Unsorted(usize),
    #[error("volume dims {left:?} and {right:?} differ")]
    DimsMismatch { left: [usize; 3], right: [usize; 3] },
    #[error("annotation value {value} at voxel {index} is not 0 or 1")]
    NonBinaryAnnotation { index: usize, value: f64 },
    #[error("probability value {value} at voxel {index} is outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },
    #[error("expected dtype {expected}, found {found}")]
    BadDtype {
        expected: &'static str,
        found: &'static str,
    },
    #[error("bad volume header: {0}")]
    BadHeader(&'static str),
    #[error("sigma must be non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("rater index {index} out of range for {count} raters")]
    RaterIndexOutOfRange { index: usize, count: usize },
    #[error("threshold list is empty")]
    EmptyThresholds,
    #[error("threshold {0} is not in (0, 1)")]
    InvalidThreshold(f64),
    #[error("distortion is not invertible on [0, 1]")]
    NonInvertibleDistortion,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("calibrator bundle is inconsistent: {0}")]
    InvalidBundle(&'static str),
}
