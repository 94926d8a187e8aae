//! `nlospos`: scene simulation, single-shot estimation, detector calibration
//! and Monte Carlo sweeps.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use nlospos_core::detector::threshold_for_alpha;
use nlospos_core::harness::montecarlo::{
    calibrate_scene, write_metrics_csv, write_trials_csv, DEFAULT_CALIBRATION_TRIALS, DEFAULT_SIGMA_ANGLE,
    DEFAULT_SIGMA_RANGE, DEFAULT_TRIALS,
};
use nlospos_core::harness::{
    export_paths, import_paths, load_scene, run_montecarlo, ExperimentConfig, ExperimentSource, LabeledPath,
};
use nlospos_core::pipeline;
use nlospos_core::scene::observations_from_scene;
use nlospos_core::{DetectorConfig, NoiseModel, OrderingMode, Vec3, WeightMode};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "nlospos", version, about = "Single-anchor positioning with multi-bounce path rejection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate a scene's paths (optionally noisy) and write paths.csv.
    Simulate(SimulateArgs),
    /// Run the iterative estimator on a path file and write report.json.
    Estimate(EstimateArgs),
    /// Sweep noise levels and write metrics.csv (and trials.csv with --detail).
    Montecarlo(MonteCarloArgs),
    /// Fit a detector on a scene's single-bounce paths and write detector.json.
    Calibrate(CalibrateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Ordering {
    Delay,
    Amplitude,
}

impl From<Ordering> for OrderingMode {
    fn from(o: Ordering) -> Self {
        match o {
            Ordering::Delay => OrderingMode::DelayAscending,
            Ordering::Amplitude => OrderingMode::AmplitudeDescending,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Weights {
    Gain,
    Uniform,
}

impl From<Weights> for WeightMode {
    fn from(w: Weights) -> Self {
        match w {
            Weights::Gain => WeightMode::GainNormalized,
            Weights::Uniform => WeightMode::Uniform,
        }
    }
}

#[derive(Args, Debug)]
struct Processing {
    #[arg(long, value_enum, default_value = "delay")]
    ordering: Ordering,
    #[arg(long, value_enum, default_value = "gain")]
    weights: Weights,
    /// Family-wise false-alarm target for the detector threshold.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Angle noise standard deviation, radians.
    #[arg(long, default_value_t = 0.0)]
    sigma_angle: f64,
    /// Range noise standard deviation, meters.
    #[arg(long, default_value_t = 0.0)]
    sigma_range: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    paths: PathBuf,
    /// Scene supplying the transmitter position (and truth for error reporting).
    #[arg(long, conflicts_with = "tx")]
    scene: Option<PathBuf>,
    /// Transmitter position `x,y,z` in meters.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    tx: Option<Vec3>,
    /// Detector from `calibrate`; default assumes noise-free input.
    #[arg(long)]
    detector: Option<PathBuf>,
    #[command(flatten)]
    processing: Processing,
    /// Directory for report.json; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MonteCarloArgs {
    #[arg(long, required_unless_present = "paths")]
    scene: Option<PathBuf>,
    /// Labeled path file used as noise-free truth (needs --tx, --rx, --clock-bias-ns).
    #[arg(long, conflicts_with_all = ["scene", "sweep_ue"], requires_all = ["tx", "rx", "clock_bias_ns"])]
    paths: Option<PathBuf>,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    tx: Option<Vec3>,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    rx: Option<Vec3>,
    #[arg(long)]
    clock_bias_ns: Option<f64>,
    /// Evaluate the scene at the ten built-in receiver positions.
    #[arg(long, requires = "scene")]
    sweep_ue: bool,
    /// Comma-separated angle noise levels, radians.
    #[arg(long, value_delimiter = ',')]
    sigma_angle: Option<Vec<f64>>,
    /// Comma-separated range noise levels, meters.
    #[arg(long, value_delimiter = ',')]
    sigma_range: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_TRIALS)]
    calibration_trials: usize,
    /// Fixed detector for every grid point instead of per-point calibration.
    #[arg(long)]
    detector: Option<PathBuf>,
    /// Also write per-trial errors to trials.csv.
    #[arg(long)]
    detail: bool,
    #[command(flatten)]
    processing: Processing,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    sigma_angle: f64,
    #[arg(long)]
    sigma_range: f64,
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    processing: Processing,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<nlospos_core::Error> for Failure {
    fn from(e: nlospos_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

fn parse_vec3(text: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, z] if parts.iter().all(|v| v.is_finite()) => Ok(Vec3::new(x, y, z)),
        _ => Err(format!("expected three finite comma-separated numbers, got {text:?}")),
    }
}

fn create_out_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load_detector(path: &Path) -> anyhow::Result<DetectorConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let det: DetectorConfig = serde_json::from_str(&text)
        .map_err(nlospos_core::Error::from)
        .with_context(|| format!("parsing {}", path.display()))?;
    det.validate().with_context(|| format!("validating {}", path.display()))?;
    Ok(det)
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let scene = load_scene(&args.scene).with_context(|| format!("loading {}", args.scene.display()))?;
    let noise = NoiseModel::new(args.sigma_angle, args.sigma_range, args.seed)?;
    let (observations, truth) = observations_from_scene(&scene, &noise)?;
    let labeled: Vec<LabeledPath> = observations
        .iter()
        .zip(&truth)
        .map(|(o, t)| LabeledPath {
            observation: *o,
            bounce_count: Some(t.bounce_count),
        })
        .collect();
    create_out_dir(&args.out)?;
    let file = args.out.join("paths.csv");
    export_paths(&file, &labeled)?;
    println!("wrote {} paths to {}", labeled.len(), file.display());
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<(), Failure> {
    let (tx, truth) = match (&args.scene, &args.tx) {
        (Some(path), _) => {
            let scene = load_scene(path).with_context(|| format!("loading {}", path.display()))?;
            (scene.tx, Some((scene.rx, scene.clock_bias)))
        }
        (None, Some(v)) => (*v, None),
        (None, None) => return Err(Failure::Usage("estimate needs --scene or --tx".into())),
    };
    let labeled = import_paths(&args.paths).with_context(|| format!("importing {}", args.paths.display()))?;
    let paths: Vec<_> = labeled.iter().map(|p| p.observation).collect();
    let detector = match &args.detector {
        Some(p) => load_detector(p)?,
        None => DetectorConfig {
            threshold: threshold_for_alpha(args.processing.alpha, paths.len().saturating_sub(1).max(2))?,
            ..DetectorConfig::default()
        },
    };
    let result = pipeline::run(
        &paths,
        &tx,
        args.processing.ordering.into(),
        args.processing.weights.into(),
        &detector,
    )?;
    if !(result.position.iter().all(|v| v.is_finite()) && result.clock_bias.is_finite()) {
        return Err(nlospos_core::Error::NonFinite("final estimate").into());
    }
    let mut report = json!({
        "position_m": [result.position.x, result.position.y, result.position.z],
        "clock_bias_s": result.clock_bias,
        "clock_bias_ns": result.clock_bias * 1e9,
        "paths_total": paths.len(),
        "paths_used": result.paths_used,
        "fallback_all_paths": result.fallback_all_paths,
        "rank_deficient": result.estimate.rank_deficient,
        "position_identifiable": result.estimate.position_identifiable,
        "residual_series_m": result.residual_series.values(),
        "detection": result.detection,
        "detector": detector,
    });
    if let Some((rx, clock_bias)) = truth {
        report["position_error_m"] = json!((result.position - rx).norm());
        report["clock_bias_error_ns"] = json!((result.clock_bias - clock_bias) * 1e9);
    }
    let text = serde_json::to_string_pretty(&report).map_err(|e| anyhow!(e))?;
    match &args.out {
        Some(dir) => {
            create_out_dir(dir)?;
            let file = dir.join("report.json");
            fs::write(&file, text + "\n").with_context(|| format!("writing {}", file.display()))?;
            println!("wrote {}", file.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn montecarlo(args: MonteCarloArgs) -> Result<(), Failure> {
    let source = match (&args.scene, &args.paths) {
        (Some(path), None) => {
            let scene = load_scene(path).with_context(|| format!("loading {}", path.display()))?;
            if args.sweep_ue {
                ExperimentSource::UeSweep(scene)
            } else {
                ExperimentSource::Scene(scene)
            }
        }
        (None, Some(path)) => {
            let (Some(tx), Some(rx), Some(clock_bias_ns)) = (&args.tx, &args.rx, args.clock_bias_ns) else {
                return Err(Failure::Usage("--paths needs --tx, --rx and --clock-bias-ns".into()));
            };
            let paths = import_paths(path).with_context(|| format!("importing {}", path.display()))?;
            ExperimentSource::Paths {
                tx: *tx,
                rx: *rx,
                clock_bias: clock_bias_ns * 1e-9,
                paths,
            }
        }
        _ => return Err(Failure::Usage("montecarlo needs exactly one of --scene or --paths".into())),
    };
    let mut config = ExperimentConfig::new(source);
    config.sigma_angle = args.sigma_angle.unwrap_or_else(|| DEFAULT_SIGMA_ANGLE.to_vec());
    config.sigma_range = args.sigma_range.unwrap_or_else(|| DEFAULT_SIGMA_RANGE.to_vec());
    config.trials = args.trials;
    config.seed = args.seed;
    config.ordering = args.processing.ordering.into();
    config.weights = args.processing.weights.into();
    config.alpha = args.processing.alpha;
    config.calibration_trials = args.calibration_trials;
    config.detector = args.detector.as_deref().map(load_detector).transpose()?;
    config.record_trials = args.detail;

    let output = run_montecarlo(&config)?;
    create_out_dir(&args.out)?;
    let metrics = args.out.join("metrics.csv");
    let file = fs::File::create(&metrics).with_context(|| format!("creating {}", metrics.display()))?;
    write_metrics_csv(BufWriter::new(file), &output.rows)?;
    println!("wrote {} rows to {}", output.rows.len(), metrics.display());
    if args.detail {
        let trials = args.out.join("trials.csv");
        let file = fs::File::create(&trials).with_context(|| format!("creating {}", trials.display()))?;
        write_trials_csv(BufWriter::new(file), &output.trials)?;
        println!("wrote {} trial records to {}", output.trials.len(), trials.display());
    }
    Ok(())
}

fn calibrate(args: CalibrateArgs) -> Result<(), Failure> {
    let scene = load_scene(&args.scene).with_context(|| format!("loading {}", args.scene.display()))?;
    let noise = NoiseModel::new(args.sigma_angle, args.sigma_range, args.seed)?;
    let detector = calibrate_scene(
        &scene,
        &noise,
        args.trials,
        args.processing.alpha,
        args.processing.ordering.into(),
        args.processing.weights.into(),
    )?;
    create_out_dir(&args.out)?;
    let file = args.out.join("detector.json");
    let text = serde_json::to_string_pretty(&detector).map_err(|e| anyhow!(e))?;
    fs::write(&file, text + "\n").with_context(|| format!("writing {}", file.display()))?;
    println!("wrote {}", file.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<nlospos_core::Error>())
        .any(|e| e.is_numerical());
    if numerical {
        EXIT_NUMERICAL
    } else {
        EXIT_DATA
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Montecarlo(a) => montecarlo(a),
        Command::Calibrate(a) => calibrate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
