//! Command-line front end.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{DetectionSettings, Regime, ThresholdSpec};
use crate::datagen::{generate, GeneratorSpec};
use crate::error::{Error, Result};
use crate::experiment::{run_experiment, summary_csv, ExperimentSpec};
use crate::io::{self, DatasetManifest, FileRef};
use crate::metrics::evaluate;
use crate::pipeline::{run_detection, DetectionReport};

#[derive(Debug, Parser)]
#[command(name = "cpscan", version, about = "Change-point detection with sliding-window neural regressors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with known change points.
    Generate(GenerateArgs),
    /// Compute the error curve of a dataset and detect change points.
    Detect(DetectArgs),
    /// Score estimated change points against ground truth.
    Evaluate(EvaluateArgs),
    /// Repeated generate/detect/evaluate runs with a summary table.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Detection flags; each overrides the matching config-file field.
#[derive(Debug, Clone, Default, Args)]
pub struct DetectionFlags {
    /// Sets T1 = T2 = t0 and T3 = 2·t0.
    #[arg(long)]
    pub t0: Option<usize>,
    #[arg(long)]
    pub t1: Option<usize>,
    #[arg(long)]
    pub t2: Option<usize>,
    #[arg(long)]
    pub t3: Option<usize>,
    /// auto | <value> | signal[:<M1*>] | proof[:<M1*>]
    #[arg(long)]
    pub pi: Option<ThresholdSpec>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub refine_radius: Option<usize>,
    /// independent | subgaussian | dependent
    #[arg(long)]
    pub regime: Option<Regime>,
    /// Hidden widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Move each detection to the curve peak within T3 after it.
    #[arg(long)]
    pub localize: bool,
}

impl DetectionFlags {
    pub fn apply(&self, s: &mut DetectionSettings) {
        if self.t0.is_some() {
            s.t0 = self.t0;
            s.t1 = None;
            s.t2 = None;
            s.t3 = None;
        }
        s.t1 = self.t1.or(s.t1);
        s.t2 = self.t2.or(s.t2);
        s.t3 = self.t3.or(s.t3);
        if let Some(pi) = self.pi {
            s.pi = pi;
        }
        if let Some(v) = self.stride {
            s.stride = v;
        }
        s.refine_radius = self.refine_radius.or(s.refine_radius);
        if let Some(r) = self.regime {
            s.regime = r;
        }
        if let Some(h) = &self.hidden {
            s.hidden = h.clone();
        }
        if let Some(v) = self.max_epochs {
            s.train.max_epochs = v;
        }
        if let Some(v) = self.lr {
            s.train.adam.lr = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if self.localize {
            s.localize = true;
        }
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Dataset CSV (x*/y* columns, or y* only).
    #[arg(long)]
    pub data: PathBuf,
    /// Build inputs from this many lags of the y columns.
    #[arg(long)]
    pub lags: Option<usize>,
    /// Detection config (JSON).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Dataset manifest with ground truth, for diagnostics and signal thresholds.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub flags: DetectionFlags,
    #[arg(long, env = "CPSCAN_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset manifest or `{"tau": [...]}`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Detection JSON or one integer per line.
    #[arg(long)]
    pub estimates: PathBuf,
    /// Matching margin; defaults to T3 of a detection JSON.
    #[arg(long)]
    pub margin: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    #[command(flatten)]
    pub flags: DetectionFlags,
    #[arg(long, env = "CPSCAN_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub input: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub windows: Option<Windows>,
    pub outputs: Vec<FileRef>,
    pub timings_ms: BTreeMap<String, u128>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Windows {
    #[serde(rename = "T1")]
    pub t1: usize,
    #[serde(rename = "T2")]
    pub t2: usize,
    #[serde(rename = "T3")]
    pub t3: usize,
}

fn workers(requested: Option<usize>) -> usize {
    requested
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn config_digest<T: Serialize>(value: &T) -> Result<String> {
    Ok(io::digest_hex(&serde_json::to_vec(value)?))
}

struct Outputs {
    dir: PathBuf,
    refs: Vec<FileRef>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            refs: Vec::new(),
        }
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<FileRef> {
        let sha256 = io::write_bytes(&self.dir.join(name), bytes)?;
        let r = FileRef {
            path: name.into(),
            sha256,
        };
        self.refs.push(r.clone());
        Ok(r)
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let start = Instant::now();
    let mut spec: GeneratorSpec = io::read_json(&args.spec)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let generated = generate(&spec)?;
    let mut out = Outputs::new(&args.out);
    let data_ref = out.write("dataset.csv", &io::dataset_csv(&generated.dataset)?)?;
    if let Some(raw) = &generated.raw {
        out.write("raw.csv", &io::series_csv(raw)?)?;
    }
    let manifest = DatasetManifest::new(&spec, &generated, data_ref.sha256);
    out.write("manifest.json", &io::to_json_bytes(&manifest)?)?;
    let run = RunManifest {
        command: "generate".into(),
        config_digest: config_digest(&spec)?,
        seed: spec.seed,
        input: serde_json::to_value(&spec)?,
        windows: None,
        outputs: out.refs.clone(),
        timings_ms: BTreeMap::from([("total".into(), start.elapsed().as_millis())]),
    };
    io::write_json(&args.out.join("run_manifest.json"), &run)?;
    println!(
        "{} rows, change points {:?}",
        generated.dataset.len(),
        manifest.tau
    );
    Ok(())
}

fn load_settings(path: Option<&Path>, flags: &DetectionFlags) -> Result<DetectionSettings> {
    let mut settings = match path {
        Some(p) => io::read_json(p)?,
        None => DetectionSettings::default(),
    };
    flags.apply(&mut settings);
    Ok(settings)
}

fn cmd_detect(args: &DetectArgs) -> Result<()> {
    let start = Instant::now();
    let settings = load_settings(args.spec.as_deref(), &args.flags)?;
    let text = io::read_to_string(&args.data)?;
    let mut data = io::parse_dataset(&text, args.lags)?;
    if let Some(truth) = &args.truth {
        let m: DatasetManifest = io::read_json(truth)?;
        // Lagged inputs drop the first q rows, shifting every index.
        let shift = args.lags.unwrap_or(0);
        let tau: Vec<usize> = m
            .tau
            .iter()
            .filter_map(|&t| t.checked_sub(shift).filter(|&t| t > 0))
            .collect();
        let signals = if tau.len() == m.change_signals.len() {
            m.change_signals.clone()
        } else {
            Vec::new()
        };
        data = data.with_change_points(tau)?.with_noise_sigma(m.sigma)?;
        if !signals.is_empty() {
            data = data.with_change_signals(signals)?;
        }
    }
    let cfg = settings.resolve(data.len(), workers(args.workers))?;
    let loaded = start.elapsed().as_millis();
    let detection = run_detection(&data, &cfg)?;
    let scanned = start.elapsed().as_millis();

    let mut out = Outputs::new(&args.out);
    let curve_ref = out.write("curve.csv", &io::curve_csv(&detection.curve)?)?;
    let curve_json = io::CurveJson {
        t: detection.curve.t_values.clone(),
        e: detection.curve.e_values.clone(),
        config: &cfg,
    };
    out.write("curve.json", &io::to_json_bytes(&curve_json)?)?;
    let report = DetectionReport::new(&detection, &data, &cfg, settings.c0, Some(curve_ref));
    out.write("detection.json", &io::to_json_bytes(&report)?)?;
    let run = RunManifest {
        command: "detect".into(),
        config_digest: config_digest(&cfg)?,
        seed: cfg.seed,
        input: serde_json::json!({
            "dataset": args.data,
            "dataset_sha256": io::digest_hex(text.as_bytes()),
            "lags": args.lags,
        }),
        windows: Some(Windows {
            t1: cfg.t1,
            t2: cfg.t2,
            t3: cfg.t3,
        }),
        outputs: out.refs.clone(),
        timings_ms: BTreeMap::from([
            ("load".into(), loaded),
            ("detect".into(), scanned - loaded),
            ("total".into(), start.elapsed().as_millis()),
        ]),
    };
    io::write_json(&args.out.join("run_manifest.json"), &run)?;
    println!("{}", serde_json::to_string(&report.change_points)?);
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let truth = io::read_truth(&args.truth)?;
    let text = io::read_to_string(&args.estimates)?;
    let estimates = io::parse_estimates(&text)?;
    let margin = match args.margin {
        Some(m) => m,
        None => {
            #[derive(Deserialize)]
            struct T3 {
                #[serde(rename = "T3")]
                t3: usize,
            }
            serde_json::from_str::<T3>(&text)
                .map(|v| v.t3)
                .map_err(|_| Error::config("--margin is required unless the estimates are a detection report"))?
        }
    };
    let report = evaluate(&truth, &estimates, margin)?;
    let bytes = io::to_json_bytes(&report)?;
    match &args.out {
        Some(path) => {
            io::write_bytes(path, &bytes)?;
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    let start = Instant::now();
    let mut spec: ExperimentSpec = io::read_json(&args.spec)?;
    args.flags.apply(&mut spec.detection);
    let result = run_experiment(&spec, workers(args.workers))?;
    let mut out = Outputs::new(&args.out);
    for run in &result.runs {
        let dir = format!("runs/s{}_r{}", run.sigma_index, run.repetition);
        match &run.result {
            Ok(a) => {
                out.write(&format!("{dir}/curve.csv"), &a.curve_csv)?;
                out.write(&format!("{dir}/detection.json"), &a.detection_json)?;
            }
            Err(msg) => eprintln!("warning: sigma {} repetition {} failed: {msg}", run.sigma, run.repetition),
        }
    }
    out.write("summary.csv", &summary_csv(&result)?)?;
    let failed: usize = result.summaries.iter().map(|s| s.failed).sum();
    if failed > 0 {
        eprintln!("warning: {failed} run(s) failed; aggregates use completed runs only");
    }
    let run = RunManifest {
        command: "experiment".into(),
        config_digest: config_digest(&spec)?,
        seed: spec.seed,
        input: serde_json::to_value(&spec)?,
        windows: None,
        outputs: out.refs.clone(),
        timings_ms: BTreeMap::from([("total".into(), start.elapsed().as_millis())]),
    };
    io::write_json(&args.out.join("run_manifest.json"), &run)?;
    for s in &result.summaries {
        match &s.summary {
            Some(m) => println!(
                "sigma {}: completed {}, Prop(N̂=N) {}, mean distance {}",
                s.sigma,
                s.completed,
                m.prop_matched,
                m.mean_distance.map_or("inf".into(), |v| format!("{v:.2}"))
            ),
            None => println!("sigma {}: no completed runs", s.sigma),
        }
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Experiment(a) => cmd_experiment(a),
    }
}

/// Parse `args`, run, and return the process exit code. Failures print one
/// line `error[<kind>]: <message>` to stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return 2;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), e.to_string().replace('\n', " "));
            1
        }
    }
}
