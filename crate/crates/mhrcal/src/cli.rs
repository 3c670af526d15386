//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data or validation
//! errors. With `--json`, results and errors go to stdout as JSON.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mhrcal_core::bootstrap::DEFAULT_RESAMPLES;
use mhrcal_core::calibration::{Subsample, DEFAULT_TRAIN_BINS};
use mhrcal_core::metrics::{default_tdsc_thresholds, evaluate_case, reliability, EvalParams, DEFAULT_ECE_BINS};
use mhrcal_core::synth::{Distortion, RaterModel, SynthConfig};
use mhrcal_core::{fit, CalibrationCase, CalibratorBundle, RaterSet, Role, TargetKind, TargetSpec, Volume};
use serde_json::json;

use crate::bench::{calibrate_cases, evaluate_cases, run_bench, BenchConfig, CI_LEVEL};
use crate::error::{Error, Result};
use crate::manifest::{load_manifest, manifest_hash, LoadOptions, LoadedCase, Split};
use crate::report::{write_reliability_csv, Metric, MetricsReport};
use crate::synth_io::write_dataset;
use crate::volume_io::{read_probability, read_volume, write_volume};

macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = write!(io::stdout().lock(), $($arg)*);
    }};
}

macro_rules! outln {
    ($($arg:tt)*) => {{
        let _ = writeln!(io::stdout().lock(), $($arg)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mhrcal", version, about = "Calibrate segmentation probabilities to the mean human response")]
pub struct Cli {
    /// Seed for synthetic data, voxel subsampling and bootstrap resampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 or unset uses all available cores.
    #[arg(long, global = true, env = "MHRCAL_THREADS")]
    pub threads: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: log::LevelFilter,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-rater dataset.
    Synth(SynthArgs),
    /// Fit a calibrator on the calibration split of a manifest.
    Fit(FitArgs),
    /// Apply a fitted calibrator to one probability volume.
    Apply(ApplyArgs),
    /// Per-case metrics for one case or for a manifest split.
    Eval(EvalArgs),
    /// Compare calibration targets on a manifest.
    Bench(BenchArgs),
    /// Reliability curve against the mean human response.
    Reliability(ReliabilityArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON config file; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Volume size, either `n` or `x,y,z`.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<[usize; 3]>,
    #[arg(long)]
    pub raters: Option<usize>,
    #[arg(long)]
    pub cases: Option<usize>,
    #[arg(long)]
    pub calibration_cases: Option<usize>,
    /// `identity`, `power:<gamma>` or `logistic:<a>:<b>`.
    #[arg(long, value_parser = parse_distortion)]
    pub distortion: Option<Distortion>,
    /// `bernoulli` or `threshold_jitter:<sigma>`.
    #[arg(long, value_parser = parse_rater_model)]
    pub rater_model: Option<RaterModel>,
    /// Standard deviation of Gaussian noise added to predictions.
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LoadArgs {
    /// Clamp out-of-range probabilities with a warning instead of failing.
    #[arg(long)]
    pub clamp: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// `mhr`, `single_rater:<i>`, `hard_label` or `none`.
    #[arg(long, default_value = "mhr", value_parser = parse_target)]
    pub target: TargetKind,
    #[arg(long, default_value_t = DEFAULT_TRAIN_BINS)]
    pub bins: usize,
    /// Keep this fraction of calibration voxels (seeded by `--seed`).
    #[arg(long)]
    pub subsample: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub load: LoadArgs,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    /// Calibrator bundle written by `fit`.
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub load: LoadArgs,
}

#[derive(Debug, Args)]
pub struct CaseSource {
    /// Single case: probability volume.
    #[arg(long, conflicts_with = "manifest", requires = "raters")]
    pub pred: Option<PathBuf>,
    /// Single case: rater masks.
    #[arg(long, num_args = 1.., conflicts_with = "manifest")]
    pub raters: Vec<PathBuf>,
    /// Manifest whose split is evaluated.
    #[arg(long, required_unless_present = "pred")]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value = "test", value_parser = parse_split)]
    pub split: Split,
    /// Calibrator applied to manifest predictions before evaluation.
    #[arg(long, requires = "manifest")]
    pub map: Option<PathBuf>,
    #[command(flatten)]
    pub load: LoadArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: CaseSource,
    /// Per-case metrics CSV; a table is printed when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated TDSC thresholds in (0, 1).
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_ECE_BINS)]
    pub ece_bins: usize,
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    pub resamples: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for the result JSON and CSVs.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    pub resamples: usize,
    /// Comma-separated targets.
    #[arg(long, value_delimiter = ',', value_parser = parse_target,
          default_value = "none,single_rater:0,hard_label,mhr")]
    pub targets: Vec<TargetKind>,
    /// Comma-separated metrics.
    #[arg(long, value_delimiter = ',', value_parser = parse_metric, default_value = "tdsc,ece,crps")]
    pub metrics: Vec<Metric>,
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_ECE_BINS)]
    pub ece_bins: usize,
    #[arg(long, default_value_t = DEFAULT_TRAIN_BINS)]
    pub train_bins: usize,
    #[command(flatten)]
    pub load: LoadArgs,
}

#[derive(Debug, Args)]
pub struct ReliabilityArgs {
    #[command(flatten)]
    pub source: CaseSource,
    #[arg(long, default_value_t = DEFAULT_ECE_BINS)]
    pub bins: usize,
    /// Curve CSV; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_dims(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()?;
    match parts.as_slice() {
        [n] => Ok([*n; 3]),
        [x, y, z] => Ok([*x, *y, *z]),
        _ => Err("expected `n` or `x,y,z`".into()),
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.trim().parse().map_err(|_| format!("not a number: {s:?}"))
}

fn parse_distortion(s: &str) -> std::result::Result<Distortion, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["identity"] => Ok(Distortion::Identity),
        ["power", g] => Ok(Distortion::Power { gamma: parse_f64(g)? }),
        ["logistic", a, b] => Ok(Distortion::Logistic {
            a: parse_f64(a)?,
            b: parse_f64(b)?,
        }),
        _ => Err("expected identity, power:<gamma> or logistic:<a>:<b>".into()),
    }
}

fn parse_rater_model(s: &str) -> std::result::Result<RaterModel, String> {
    match s.split_once(':') {
        None if s == "bernoulli" => Ok(RaterModel::Bernoulli),
        Some(("threshold_jitter" | "jitter", sigma)) => Ok(RaterModel::ThresholdJitter {
            sigma: parse_f64(sigma)?,
        }),
        _ => Err("expected bernoulli or threshold_jitter:<sigma>".into()),
    }
}

fn parse_target(s: &str) -> std::result::Result<TargetKind, String> {
    s.parse().map_err(|e: mhrcal_core::Error| e.to_string())
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    match s {
        "calibration" => Ok(Split::Calibration),
        "test" => Ok(Split::Test),
        _ => Err("expected calibration or test".into()),
    }
}

/// Parse `args` (including the program name), run the command and return
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level)
        .target(env_logger::Target::Stderr)
        .try_init();

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_DATA;
        }
    };
    let json_out = cli.json;
    match pool.install(|| dispatch(&cli)) {
        Ok(value) => {
            if json_out {
                outln!("{}", serde_json::to_string_pretty(&value).expect("json output"));
            }
            EXIT_OK
        }
        Err(e) => {
            if json_out {
                let v = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
                outln!("{v}");
            } else {
                eprintln!("error: {e}");
            }
            EXIT_DATA
        }
    }
}

fn dispatch(cli: &Cli) -> Result<serde_json::Value> {
    match &cli.command {
        Command::Synth(a) => synth(cli, a),
        Command::Fit(a) => fit_cmd(cli, a),
        Command::Apply(a) => apply(cli, a),
        Command::Eval(a) => eval(cli, a),
        Command::Bench(a) => bench(cli, a),
        Command::Reliability(a) => reliability_cmd(cli, a),
    }
}

fn load_opts(a: &LoadArgs) -> LoadOptions {
    LoadOptions { clamp: a.clamp }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

fn synth(cli: &Cli, a: &SynthArgs) -> Result<serde_json::Value> {
    let mut config = match &a.config {
        Some(p) => read_json::<SynthConfig>(p)?,
        None => SynthConfig::default(),
    };
    if let Some(d) = a.dims {
        config.dims = d;
    }
    if let Some(n) = a.raters {
        config.n_raters = n;
    }
    if let Some(n) = a.cases {
        config.n_cases = n;
    }
    if let Some(n) = a.calibration_cases {
        config.calibration_cases = n;
    }
    if let Some(d) = a.distortion {
        config.distortion = d;
    }
    if let Some(m) = a.rater_model {
        config.rater_model = m;
    }
    if let Some(s) = a.noise {
        config.prediction_noise = s;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let manifest = write_dataset(&config, &a.out)?;
    let path = a.out.join("manifest.json");
    if !cli.json {
        outln!("wrote {} cases to {}", manifest.cases.len(), path.display());
    }
    Ok(json!({"manifest": path, "cases": manifest.cases.len(), "config": config}))
}

fn fit_cmd(cli: &Cli, a: &FitArgs) -> Result<serde_json::Value> {
    let manifest = load_manifest(&a.manifest)?;
    let cases = manifest.load_split(Split::Calibration, load_opts(&a.load))?;
    let refs: Vec<CalibrationCase<'_>> = cases
        .iter()
        .map(|c| CalibrationCase {
            prediction: &c.prediction,
            raters: &c.raters,
            roi: c.roi.as_ref(),
        })
        .collect();
    let options = mhrcal_core::FitOptions {
        subsample: a.subsample.map(|fraction| Subsample {
            fraction,
            seed: cli.seed.unwrap_or(0),
        }),
    };
    let mut bundle = fit(&refs, &TargetSpec::new(a.target).with_bins(a.bins), &options)?;
    bundle.set_train_manifest_hash(manifest_hash(&a.manifest)?);
    let text = serde_json::to_string_pretty(&bundle).expect("bundle serializes");
    fs::write(&a.out, text).map_err(|e| Error::io(&a.out, e))?;
    if !cli.json {
        outln!(
            "fitted {} calibrator ({} maps) on {} cases -> {}",
            a.target,
            bundle.maps().len(),
            cases.len(),
            a.out.display()
        );
    }
    Ok(json!({"out": a.out, "target": a.target.to_string(), "maps": bundle.maps().len(),
              "calibration_cases": cases.len()}))
}

fn read_bundle(path: &Path) -> Result<CalibratorBundle> {
    read_json(path)
}

fn apply(cli: &Cli, a: &ApplyArgs) -> Result<serde_json::Value> {
    let bundle = read_bundle(&a.map)?;
    let pred = read_probability(&a.input, a.load.clamp)?;
    let out = bundle.apply(&pred)?;
    write_volume(&out, &a.out)?;
    if !cli.json {
        outln!("wrote {}", a.out.display());
    }
    Ok(json!({"out": a.out, "voxels": out.header().voxel_count()}))
}

/// Cases to evaluate, with predictions already calibrated when a map is given.
fn gather(source: &CaseSource) -> Result<(Vec<LoadedCase>, Vec<Volume>)> {
    if let Some(pred) = &source.pred {
        let prediction = read_probability(pred, source.load.clamp)?;
        let raters = source
            .raters
            .iter()
            .map(|p| read_volume(p, Role::Annotation))
            .collect::<Result<Vec<_>>>()?;
        let raters = RaterSet::new(raters)?;
        let case = LoadedCase {
            case_id: pred
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "case".into()),
            prediction: prediction.clone(),
            raters,
            roi: None,
        };
        return Ok((vec![case], vec![prediction]));
    }
    let path = source
        .manifest
        .as_ref()
        .ok_or_else(|| Error::Invalid("either --pred or --manifest is required".into()))?;
    let manifest = load_manifest(path)?;
    let cases = manifest.load_split(source.split, LoadOptions { clamp: source.load.clamp })?;
    let bundle = match &source.map {
        Some(m) => read_bundle(m)?,
        None => CalibratorBundle::uncalibrated(manifest.rater_count),
    };
    let calibrated = calibrate_cases(&bundle, &cases)?;
    Ok((cases, calibrated))
}

fn eval(cli: &Cli, a: &EvalArgs) -> Result<serde_json::Value> {
    let params = EvalParams {
        tdsc_thresholds: a.thresholds.clone().unwrap_or_else(default_tdsc_thresholds),
        ece_bins: a.ece_bins,
    };
    let (cases, preds) = gather(&a.source)?;
    let per_case = if cases.len() == 1 {
        vec![(cases[0].case_id.clone(), evaluate_case(&preds[0], &cases[0].raters, &params)?)]
    } else {
        evaluate_cases(&preds, &cases, &params)?
    };
    let report = MetricsReport::from_cases(
        per_case,
        &Metric::ALL,
        a.resamples,
        cli.seed.unwrap_or(0),
        CI_LEVEL,
    )?;
    if let Some(out) = &a.out {
        let f = File::create(out).map_err(|e| Error::io(out, e))?;
        report.write_cases_csv(BufWriter::new(f))?;
    }
    if !cli.json {
        if a.out.is_none() {
            report.write_cases_csv(io::stdout().lock())?;
        }
        for (metric, iv) in &report.aggregate {
            outln!("{metric}: {:.6} [{:.6}, {:.6}]", iv.mean, iv.lo, iv.hi);
        }
    }
    Ok(json!({"report": report, "tdsc_thresholds": params.tdsc_thresholds, "ece_bins": params.ece_bins}))
}

fn bench(cli: &Cli, a: &BenchArgs) -> Result<serde_json::Value> {
    let mut config = BenchConfig::new(&a.manifest);
    config.targets = a.targets.clone();
    config.metrics = a.metrics.clone();
    config.bootstrap_resamples = a.resamples;
    config.bootstrap_seed = cli.seed.unwrap_or(0);
    if let Some(t) = &a.thresholds {
        config.tdsc_thresholds = t.clone();
    }
    config.ece_bins = a.ece_bins;
    config.train_bins = a.train_bins;
    config.load = load_opts(&a.load);
    let result = run_bench(&config)?;
    log::info!("bench finished in {:.2} s", result.wall_time_secs);
    result.write_outputs(&a.out)?;
    if !cli.json {
        out!("{}", result.render_table());
        outln!("outputs written to {}", a.out.display());
    }
    Ok(serde_json::to_value(&result).expect("result serializes"))
}

fn reliability_cmd(cli: &Cli, a: &ReliabilityArgs) -> Result<serde_json::Value> {
    let (cases, preds) = gather(&a.source)?;
    let pairs: Vec<(&Volume, &RaterSet)> = preds.iter().zip(&cases).map(|(p, c)| (p, &c.raters)).collect();
    let curve = reliability(&pairs, a.bins)?;
    match &a.out {
        Some(out) => {
            let f = File::create(out).map_err(|e| Error::io(out, e))?;
            write_reliability_csv(&curve, BufWriter::new(f))?;
        }
        None if !cli.json => {
            let mut stdout = io::stdout().lock();
            write_reliability_csv(&curve, &mut stdout)?;
            stdout.flush().map_err(|e| Error::io("<stdout>", e))?;
        }
        None => {}
    }
    Ok(json!({"curve": curve, "calibration_gap": curve.calibration_gap()}))
}
