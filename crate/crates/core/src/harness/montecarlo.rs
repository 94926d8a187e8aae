//! Monte Carlo sweeps comparing the iterative estimator against the
//! all-paths and single-bounce-oracle baselines.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{threshold_for_alpha, DetectorConfig, SIGMA_FLOOR};
use crate::error::{Error, Result};
use crate::geometry::{apply_noise, NoiseModel, PathObservation, Vec3};
use crate::harness::metrics::Rmse;
use crate::harness::pathfile::LabeledPath;
use crate::pipeline::{self, order_paths, OrderingMode};
use crate::scene::{enumerate_paths, Scene};
use crate::wls::{estimate_position, WeightMode};

/// Angle noise grid, radians.
pub const DEFAULT_SIGMA_ANGLE: [f64; 7] = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1];
/// Range noise grid, meters.
pub const DEFAULT_SIGMA_RANGE: [f64; 3] = [0.1, 1.0, 2.0];
pub const DEFAULT_TRIALS: usize = 500;
pub const DEFAULT_CALIBRATION_TRIALS: usize = 200;

const CALIBRATION_STREAM: u64 = 0x00ca_11b0_0000_0000;

/// Receiver positions `[600, 499 + i, 1.5]`, `i = 1..=10`.
pub fn ue_sweep_positions() -> Vec<Vec3> {
    (1..=10).map(|i| Vec3::new(600.0, 499.0 + i as f64, 1.5)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Proposed,
    AllPaths,
    SingleBounceOracle,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Proposed, Method::AllPaths, Method::SingleBounceOracle];

    pub fn tag(&self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::AllPaths => "all-paths",
            Method::SingleBounceOracle => "single-bounce-oracle",
        }
    }
}

#[derive(Debug, Clone)]
pub enum ExperimentSource {
    Scene(Scene),
    /// The scene evaluated at each of [`ue_sweep_positions`]; metrics pool all positions.
    UeSweep(Scene),
    /// Imported observations treated as noise-free truth. Bounce labels are
    /// required for the oracle baseline.
    Paths {
        tx: Vec3,
        rx: Vec3,
        clock_bias: f64,
        paths: Vec<LabeledPath>,
    },
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: ExperimentSource,
    pub sigma_angle: Vec<f64>,
    pub sigma_range: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub ordering: OrderingMode,
    pub weights: WeightMode,
    /// Family-wise false-alarm target for the detector threshold.
    pub alpha: f64,
    pub calibration_trials: usize,
    /// Fixed detector; when absent one is calibrated per grid point.
    pub detector: Option<DetectorConfig>,
    pub record_trials: bool,
}

impl ExperimentConfig {
    pub fn new(source: ExperimentSource) -> Self {
        Self {
            source,
            sigma_angle: DEFAULT_SIGMA_ANGLE.to_vec(),
            sigma_range: DEFAULT_SIGMA_RANGE.to_vec(),
            trials: DEFAULT_TRIALS,
            seed: 0,
            ordering: OrderingMode::DelayAscending,
            weights: WeightMode::GainNormalized,
            alpha: 0.05,
            calibration_trials: DEFAULT_CALIBRATION_TRIALS,
            detector: None,
            record_trials: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if self.sigma_angle.is_empty() || self.sigma_range.is_empty() {
            return Err(Error::InvalidInput("noise grids must be nonempty".into()));
        }
        for s in self.sigma_angle.iter().chain(&self.sigma_range) {
            if !(s.is_finite() && *s >= 0.0) {
                return Err(Error::InvalidInput(format!("noise level {s}")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.detector.is_none() && self.calibration_trials < 2 {
            return Err(Error::InvalidInput("calibration needs at least 2 trials".into()));
        }
        if let Some(d) = &self.detector {
            d.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub sigma_angle: f64,
    pub sigma_range: f64,
    pub method: Method,
    /// `√(mean ‖err‖)`, meters^½.
    pub rmse_position_literal: f64,
    /// `√(mean ‖err‖²)`, meters.
    pub rmse_position: f64,
    /// `√(mean |err_ns|)`.
    pub rmse_clock_bias_literal_ns: f64,
    /// `√(mean err_ns²)`, nanoseconds.
    pub rmse_clock_bias_ns: f64,
    pub mean_paths_used: f64,
    pub detection_rate: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sigma_angle: f64,
    pub sigma_range: f64,
    pub ue_index: usize,
    pub trial: usize,
    pub method: Method,
    pub position_error_m: f64,
    pub clock_bias_error_ns: f64,
    pub paths_used: usize,
    pub detected: bool,
}

#[derive(Debug, Clone, Default)]
pub struct MonteCarloOutput {
    pub rows: Vec<MetricsRow>,
    /// Populated only when `record_trials` is set.
    pub trials: Vec<TrialRecord>,
}

/// Noise-free observations with truth labels and geometry.
#[derive(Debug, Clone)]
struct TruthSet {
    tx: Vec3,
    rx: Vec3,
    clock_bias: f64,
    observations: Vec<PathObservation>,
    bounce_counts: Vec<usize>,
}

impl TruthSet {
    fn from_scene(scene: &Scene) -> Result<Self> {
        let paths = enumerate_paths(scene)?;
        if paths.len() < 2 {
            return Err(Error::InsufficientPaths {
                required: 2,
                found: paths.len(),
            });
        }
        Ok(Self {
            tx: scene.tx,
            rx: scene.rx,
            clock_bias: scene.clock_bias,
            observations: paths.iter().map(|p| p.observation).collect(),
            bounce_counts: paths.iter().map(|p| p.bounce_count).collect(),
        })
    }

    fn single_bounce_indices(&self) -> Vec<usize> {
        (0..self.bounce_counts.len()).filter(|&i| self.bounce_counts[i] <= 1).collect()
    }
}

fn truth_sets(source: &ExperimentSource) -> Result<Vec<TruthSet>> {
    match source {
        ExperimentSource::Scene(scene) => Ok(vec![TruthSet::from_scene(scene)?]),
        ExperimentSource::UeSweep(scene) => ue_sweep_positions()
            .into_iter()
            .map(|rx| TruthSet::from_scene(&scene.with_rx(rx)))
            .collect(),
        ExperimentSource::Paths {
            tx,
            rx,
            clock_bias,
            paths,
        } => {
            if paths.len() < 2 {
                return Err(Error::InsufficientPaths {
                    required: 2,
                    found: paths.len(),
                });
            }
            let bounce_counts = paths
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    p.bounce_count.ok_or_else(|| Error::Validation {
                        row: i + 1,
                        msg: "bounce_count label required for the oracle baseline".into(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(vec![TruthSet {
                tx: *tx,
                rx: *rx,
                clock_bias: *clock_bias,
                observations: paths.iter().map(|p| p.observation).collect(),
                bounce_counts,
            }])
        }
    }
}

/// SplitMix64 finalizer; decorrelates seeds derived from consecutive indices.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial RNG seed, a pure function of the experiment seed and trial index.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    mix(mix(seed) ^ trial)
}

/// Inputs of a detector calibration run.
#[derive(Debug, Clone)]
pub struct CalibrationSpec {
    pub tx: Vec3,
    /// Noise-free LOS/single-bounce observations.
    pub h0_paths: Vec<PathObservation>,
    pub sigma_angle: f64,
    pub sigma_range: f64,
    pub trials: usize,
    pub alpha: f64,
    /// Residual-series length the threshold has to cover.
    pub horizon: usize,
    pub seed: u64,
    pub ordering: OrderingMode,
    pub weights: WeightMode,
}

/// Fits the H₀ mean and spread of `Δ_t` (t ≥ 2) on single-bounce-only data
/// and sets the threshold for `alpha` over `horizon` residuals.
pub fn calibrate_detector(spec: &CalibrationSpec) -> Result<DetectorConfig> {
    if spec.h0_paths.len() < 3 {
        return Err(Error::InsufficientPaths {
            required: 3,
            found: spec.h0_paths.len(),
        });
    }
    if spec.trials < 1 {
        return Err(Error::InvalidInput("calibration needs at least one trial".into()));
    }
    let threshold = threshold_for_alpha(spec.alpha, spec.horizon.max(2))?;
    let samples: Vec<Vec<f64>> = (0..spec.trials)
        .into_par_iter()
        .map(|k| {
            let noise = NoiseModel::new(spec.sigma_angle, spec.sigma_range, trial_seed(spec.seed, k as u64))?;
            let noisy = order_paths(&apply_noise(&spec.h0_paths, &noise), spec.ordering);
            let (series, _) = pipeline::residual_series(&noisy, &spec.tx, spec.weights)
                .map_err(|e| Error::Trial { trial: k, source: Box::new(e) })?;
            Ok(series.values()[1..].to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = samples.into_iter().flatten().collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    DetectorConfig::new(mean, sd.max(SIGMA_FLOOR), threshold, 1)
}

/// Calibrates against a scene's own LOS/single-bounce paths, with the
/// threshold sized for the scene's full path count.
pub fn calibrate_scene(
    scene: &Scene,
    noise: &NoiseModel,
    trials: usize,
    alpha: f64,
    ordering: OrderingMode,
    weights: WeightMode,
) -> Result<DetectorConfig> {
    let truth = TruthSet::from_scene(scene)?;
    calibrate_detector(&calibration_spec(&truth, noise.sigma_angle, noise.sigma_range, trials, alpha, noise.rng_seed, ordering, weights))
}

#[allow(clippy::too_many_arguments)]
fn calibration_spec(
    truth: &TruthSet,
    sigma_angle: f64,
    sigma_range: f64,
    trials: usize,
    alpha: f64,
    seed: u64,
    ordering: OrderingMode,
    weights: WeightMode,
) -> CalibrationSpec {
    CalibrationSpec {
        tx: truth.tx,
        h0_paths: truth.single_bounce_indices().iter().map(|&i| truth.observations[i]).collect(),
        sigma_angle,
        sigma_range,
        trials,
        alpha,
        horizon: truth.observations.len().saturating_sub(1),
        seed,
        ordering,
        weights,
    }
}

struct MethodOutcome {
    position: Vec3,
    clock_bias: f64,
    paths_used: usize,
    detected: bool,
}

fn run_trial(
    truth: &TruthSet,
    config: &ExperimentConfig,
    detector: &DetectorConfig,
    noise: &NoiseModel,
) -> Result<[MethodOutcome; 3]> {
    let noisy = apply_noise(&truth.observations, noise);
    let proposed = pipeline::run(&noisy, &truth.tx, config.ordering, config.weights, detector)?;
    let all = estimate_position(&noisy, &truth.tx, config.weights)?;
    let subset: Vec<PathObservation> = truth.single_bounce_indices().iter().map(|&i| noisy[i]).collect();
    let oracle = estimate_position(&subset, &truth.tx, config.weights)?;
    Ok([
        MethodOutcome {
            position: proposed.position,
            clock_bias: proposed.clock_bias,
            paths_used: proposed.paths_used,
            detected: proposed.detection.detected,
        },
        MethodOutcome {
            position: all.position(),
            clock_bias: all.clock_bias,
            paths_used: noisy.len(),
            detected: false,
        },
        MethodOutcome {
            position: oracle.position(),
            clock_bias: oracle.clock_bias,
            paths_used: subset.len(),
            detected: false,
        },
    ])
}

/// Runs every grid point and returns one metrics row per (grid point, method),
/// in grid order. Results depend only on the configuration, not on thread
/// scheduling.
pub fn run_montecarlo(config: &ExperimentConfig) -> Result<MonteCarloOutput> {
    config.validate()?;
    let sets = truth_sets(&config.source)?;
    for set in &sets {
        if set.single_bounce_indices().len() < 2 {
            return Err(Error::InsufficientPaths {
                required: 2,
                found: set.single_bounce_indices().len(),
            });
        }
    }
    let mut out = MonteCarloOutput::default();
    for &sigma_angle in &config.sigma_angle {
        for &sigma_range in &config.sigma_range {
            let mut records: Vec<TrialRecord> = Vec::with_capacity(3 * config.trials * sets.len());
            for (ue_index, truth) in sets.iter().enumerate() {
                let detector = match config.detector {
                    Some(d) => d,
                    None => calibrate_detector(&calibration_spec(
                        truth,
                        sigma_angle,
                        sigma_range,
                        config.calibration_trials,
                        config.alpha,
                        config.seed ^ CALIBRATION_STREAM ^ ue_index as u64,
                        config.ordering,
                        config.weights,
                    ))?,
                };
                let offset = (ue_index * config.trials) as u64;
                let outcomes = (0..config.trials)
                    .into_par_iter()
                    .map(|k| {
                        let noise = NoiseModel::new(sigma_angle, sigma_range, trial_seed(config.seed, offset + k as u64))?;
                        run_trial(truth, config, &detector, &noise).map_err(|e| Error::Trial {
                            trial: k,
                            source: Box::new(e),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                for (trial, methods) in outcomes.into_iter().enumerate() {
                    for (method, m) in Method::ALL.iter().zip(methods) {
                        records.push(TrialRecord {
                            sigma_angle,
                            sigma_range,
                            ue_index,
                            trial,
                            method: *method,
                            position_error_m: (m.position - truth.rx).norm(),
                            clock_bias_error_ns: (m.clock_bias - truth.clock_bias) * 1e9,
                            paths_used: m.paths_used,
                            detected: m.detected,
                        });
                    }
                }
            }
            for method in Method::ALL {
                let mine: Vec<&TrialRecord> = records.iter().filter(|r| r.method == method).collect();
                let pos = Rmse::from_errors(
                    &mine.iter().map(|r| r.position_error_m).collect::<Vec<_>>(),
                )?;
                let clk = Rmse::from_errors(
                    &mine.iter().map(|r| r.clock_bias_error_ns).collect::<Vec<_>>(),
                )?;
                let k = mine.len() as f64;
                out.rows.push(MetricsRow {
                    sigma_angle,
                    sigma_range,
                    method,
                    rmse_position_literal: pos.literal,
                    rmse_position: pos.conventional,
                    rmse_clock_bias_literal_ns: clk.literal,
                    rmse_clock_bias_ns: clk.conventional,
                    mean_paths_used: mine.iter().map(|r| r.paths_used as f64).sum::<f64>() / k,
                    detection_rate: mine.iter().filter(|r| r.detected).count() as f64 / k,
                    trials: mine.len(),
                });
            }
            if config.record_trials {
                out.trials.extend(records);
            }
        }
    }
    Ok(out)
}

pub const METRICS_HEADER: [&str; 10] = [
    "sigma_angle_rad",
    "sigma_range_m",
    "method",
    "rmse_position_literal",
    "rmse_position_m",
    "rmse_clock_bias_literal_ns",
    "rmse_clock_bias_ns",
    "mean_paths_used",
    "detection_rate",
    "trials",
];

pub fn write_metrics_csv<W: Write>(writer: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(METRICS_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.sigma_angle.to_string(),
            r.sigma_range.to_string(),
            r.method.tag().to_string(),
            r.rmse_position_literal.to_string(),
            r.rmse_position.to_string(),
            r.rmse_clock_bias_literal_ns.to_string(),
            r.rmse_clock_bias_ns.to_string(),
            r.mean_paths_used.to_string(),
            r.detection_rate.to_string(),
            r.trials.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trials_csv<W: Write>(writer: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record([
        "sigma_angle_rad",
        "sigma_range_m",
        "ue_index",
        "trial",
        "method",
        "position_error_m",
        "clock_bias_error_ns",
        "paths_used",
        "detected",
    ])
    .map_err(io)?;
    for r in records {
        w.write_record([
            r.sigma_angle.to_string(),
            r.sigma_range.to_string(),
            r.ue_index.to_string(),
            r.trial.to_string(),
            r.method.tag().to_string(),
            r.position_error_m.to_string(),
            r.clock_bias_error_ns.to_string(),
            r.paths_used.to_string(),
            r.detected.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
