//! Calibration-target comparison: fit each target on the calibration split,
//! evaluate on the test split, and aggregate per-case metrics with a
//! case-level bootstrap.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mhrcal_core::metrics::{
    default_tdsc_thresholds, evaluate_case, reliability, EvalParams, ReliabilityCurve,
    DEFAULT_ECE_BINS,
};
use mhrcal_core::bootstrap::DEFAULT_RESAMPLES;
use mhrcal_core::calibration::DEFAULT_TRAIN_BINS;
use mhrcal_core::{fit, CalibrationCase, CalibratorBundle, FitOptions, TargetKind, TargetSpec, Volume};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{load_manifest, manifest_hash, LoadOptions, LoadedCase, Split};
use crate::report::{write_reliability_csv, Metric, MetricsReport};

pub const CI_LEVEL: f64 = 0.95;

pub fn default_targets() -> Vec<TargetKind> {
    vec![
        TargetKind::None,
        TargetKind::SingleRater { rater: 0 },
        TargetKind::HardLabel,
        TargetKind::Mhr,
    ]
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub manifest_path: PathBuf,
    pub targets: Vec<TargetKind>,
    pub metrics: Vec<Metric>,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
    pub tdsc_thresholds: Vec<f64>,
    pub ece_bins: usize,
    pub train_bins: usize,
    pub load: LoadOptions,
    pub fit: FitOptions,
}

impl BenchConfig {
    pub fn new(manifest_path: impl Into<PathBuf>) -> Self {
        Self {
            manifest_path: manifest_path.into(),
            targets: default_targets(),
            metrics: Metric::ALL.to_vec(),
            bootstrap_resamples: DEFAULT_RESAMPLES,
            bootstrap_seed: 0,
            tdsc_thresholds: default_tdsc_thresholds(),
            ece_bins: DEFAULT_ECE_BINS,
            train_bins: DEFAULT_TRAIN_BINS,
            load: LoadOptions::default(),
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetResult {
    pub target: String,
    pub report: MetricsReport,
    pub reliability: ReliabilityCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub manifest_hash: String,
    pub rater_count: usize,
    pub calibration_cases: usize,
    pub test_cases: usize,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
    pub ci_level: f64,
    pub tdsc_thresholds: Vec<f64>,
    pub ece_bins: usize,
    pub train_bins: usize,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub targets: Vec<TargetResult>,
    /// Per metric, target labels from best to worst aggregate mean.
    pub ranking: BTreeMap<Metric, Vec<String>>,
    pub metadata: RunMetadata,
    /// Wall-clock seconds; kept out of the serialized result so that equal
    /// seeds give byte-identical output.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl BenchResult {
    pub fn target(&self, label: &str) -> Option<&TargetResult> {
        self.targets.iter().find(|t| t.target == label)
    }

    pub fn mean(&self, label: &str, metric: Metric) -> Option<f64> {
        self.target(label)
            .and_then(|t| t.report.aggregate.get(&metric))
            .map(|iv| iv.mean)
    }

    pub fn write_table_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["target", "metric", "mean", "ci_lo", "ci_hi"])?;
        for t in &self.targets {
            for (metric, iv) in &t.report.aggregate {
                w.write_record([
                    t.target.clone(),
                    metric.to_string(),
                    iv.mean.to_string(),
                    iv.lo.to_string(),
                    iv.hi.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Write `bench_result.json`, `bench_table.csv` and one
    /// `reliability_<target>.csv` per target into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json_path = dir.join("bench_result.json");
        let json = serde_json::to_string_pretty(self).expect("result serializes");
        fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
        let table_path = dir.join("bench_table.csv");
        let f = File::create(&table_path).map_err(|e| Error::io(&table_path, e))?;
        self.write_table_csv(BufWriter::new(f))?;
        for t in &self.targets {
            let path = dir.join(format!("reliability_{}.csv", t.target));
            let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_reliability_csv(&t.reliability, BufWriter::new(f))?;
        }
        Ok(())
    }

    /// Plain-text table for terminals.
    pub fn render_table(&self) -> String {
        let mut s = format!("{:<16}", "target");
        let metrics: Vec<Metric> = self
            .targets
            .first()
            .map(|t| t.report.aggregate.keys().copied().collect())
            .unwrap_or_default();
        for m in &metrics {
            s.push_str(&format!(" {:>34}", m.name()));
        }
        s.push('\n');
        for t in &self.targets {
            s.push_str(&format!("{:<16}", t.target));
            for m in &metrics {
                let iv = t.report.aggregate[m];
                s.push_str(&format!(
                    " {:>34}",
                    format!("{:.4} [{:.4}, {:.4}]", iv.mean, iv.lo, iv.hi)
                ));
            }
            s.push('\n');
        }
        s
    }
}

fn calibration_cases(cases: &[LoadedCase]) -> Vec<CalibrationCase<'_>> {
    cases
        .iter()
        .map(|c| CalibrationCase {
            prediction: &c.prediction,
            raters: &c.raters,
            roi: c.roi.as_ref(),
        })
        .collect()
}

/// Apply `bundle` to every test case; outputs stay in case order.
pub fn calibrate_cases(bundle: &CalibratorBundle, cases: &[LoadedCase]) -> Result<Vec<Volume>> {
    cases
        .par_iter()
        .map(|c| bundle.apply(&c.prediction).map_err(Error::from))
        .collect()
}

/// Evaluate already-calibrated predictions against their cases.
pub fn evaluate_cases(
    calibrated: &[Volume],
    cases: &[LoadedCase],
    params: &EvalParams,
) -> Result<Vec<(String, mhrcal_core::metrics::CaseMetrics)>> {
    calibrated
        .par_iter()
        .zip(cases)
        .map(|(p, c)| Ok((c.case_id.clone(), evaluate_case(p, &c.raters, params)?)))
        .collect()
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchResult> {
    let start = Instant::now();
    if config.targets.is_empty() || config.metrics.is_empty() {
        return Err(Error::Invalid("at least one target and one metric are required".into()));
    }
    let manifest = load_manifest(&config.manifest_path)?;
    let hash = manifest_hash(&config.manifest_path)?;
    let calib = manifest.load_split(Split::Calibration, config.load)?;
    let test = manifest.load_split(Split::Test, config.load)?;
    let params = EvalParams {
        tdsc_thresholds: config.tdsc_thresholds.clone(),
        ece_bins: config.ece_bins,
    };
    let calib_refs = calibration_cases(&calib);

    let mut targets = Vec::with_capacity(config.targets.len());
    for &kind in &config.targets {
        let label = kind.label();
        log::info!("fitting target {label}");
        let spec = TargetSpec::new(kind).with_bins(config.train_bins);
        let bundle = fit(&calib_refs, &spec, &config.fit)?;
        let calibrated = calibrate_cases(&bundle, &test)?;
        let per_case = evaluate_cases(&calibrated, &test, &params)?;
        let pairs: Vec<(&Volume, &mhrcal_core::RaterSet)> =
            calibrated.iter().zip(&test).map(|(p, c)| (p, &c.raters)).collect();
        let curve = reliability(&pairs, config.ece_bins)?;
        let report = MetricsReport::from_cases(
            per_case,
            &config.metrics,
            config.bootstrap_resamples,
            config.bootstrap_seed,
            CI_LEVEL,
        )?;
        targets.push(TargetResult {
            target: label,
            report,
            reliability: curve,
        });
    }

    let mut ranking = BTreeMap::new();
    for &metric in &config.metrics {
        let mut order: Vec<&TargetResult> = targets.iter().collect();
        order.sort_by(|a, b| {
            let (x, y) = (
                a.report.aggregate[&metric].mean,
                b.report.aggregate[&metric].mean,
            );
            if metric.higher_is_better() {
                y.total_cmp(&x)
            } else {
                x.total_cmp(&y)
            }
        });
        ranking.insert(metric, order.iter().map(|t| t.target.clone()).collect());
    }

    Ok(BenchResult {
        targets,
        ranking,
        metadata: RunMetadata {
            manifest_hash: hash,
            rater_count: manifest.rater_count,
            calibration_cases: calib.len(),
            test_cases: test.len(),
            bootstrap_resamples: config.bootstrap_resamples,
            bootstrap_seed: config.bootstrap_seed,
            ci_level: CI_LEVEL,
            tdsc_thresholds: config.tdsc_thresholds.clone(),
            ece_bins: config.ece_bins,
            train_bins: config.train_bins,
            note: "case-level percentile bootstrap; values depend on the dataset and are not \
                   comparable to results obtained on clinical data"
                .into(),
        },
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}
