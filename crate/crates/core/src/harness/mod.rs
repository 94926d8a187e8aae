//! Experiment plumbing: scene and path files, error metrics, detector
//! calibration and Monte Carlo sweeps.

pub mod metrics;
pub mod montecarlo;
pub mod pathfile;
pub mod scenefile;

pub use metrics::{rmse_clock_bias, rmse_position, Rmse};
pub use montecarlo::{
    calibrate_detector, run_montecarlo, CalibrationSpec, ExperimentConfig, ExperimentSource, Method, MetricsRow,
    MonteCarloOutput, TrialRecord,
};
pub use pathfile::{export_paths, import_paths, read_paths, write_paths, LabeledPath};
pub use scenefile::{load_scene, parse_scene, SceneFile};
