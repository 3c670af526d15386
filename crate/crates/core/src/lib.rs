//! Post-hoc calibration of voxelwise segmentation probabilities to the
//! multi-rater mean human response (MHR).
//!
//! Everything in this crate is pure computation over in-memory buffers and
//! builds without `std` (an allocator is required). File formats, the
//! benchmark harness and the command line live in the `mhrcal` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod binning;
pub mod bootstrap;
pub mod calibration;
pub mod error;
pub mod isotonic;
pub mod metrics;
pub mod synth;
pub mod volume;

pub use binning::{equal_mass_bins, uniform_bins, BinStats, UniformBinAccumulator};
pub use bootstrap::{bootstrap_ci, Interval};
pub use calibration::{
    fit, mean_human_response, pool_ensemble, CalibrationCase, CalibratorBundle, FitOptions,
    TargetKind, TargetSpec,
};
pub use error::{Error, Result};
pub use isotonic::{build_map, pava, CalibrationMap, IsotonicFit};
pub use volume::{Dtype, RaterSet, Role, Volume, VolumeData, VolumeHeader};
