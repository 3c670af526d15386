//! Files, manifests, benchmark harness and CLI around [`mhrcal_core`].

pub mod bench;
pub mod cli;
pub mod error;
pub mod manifest;
pub mod report;
pub mod synth_io;
pub mod volume_io;

pub use mhrcal_core as core;

pub use bench::{run_bench, BenchConfig, BenchResult};
pub use error::{Error, Result};
pub use manifest::{load_manifest, manifest_hash, CaseRecord, LoadOptions, LoadedCase, Manifest, Split};
pub use report::{Metric, MetricsReport};
pub use synth_io::write_dataset;
pub use volume_io::{read_probability, read_volume, write_volume};
