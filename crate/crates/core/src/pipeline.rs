//! Iterative localization: grow the path set one path at a time, watch the
//! drift of the position estimate, and stop once the drift starts to ramp.

use serde::{Deserialize, Serialize};

use crate::detector::{DetectionOutcome, DetectorConfig, OnlineGlrt, ResidualSeries};
use crate::error::{Error, Result};
use crate::geometry::{PathObservation, Vec3};
use crate::wls::{estimate_position, EstimateVector, WeightMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderingMode {
    /// Earliest arrival first.
    #[default]
    DelayAscending,
    /// Strongest path first.
    AmplitudeDescending,
}

/// Indices that put `paths` in processing order (stable).
pub fn ordering_permutation(paths: &[PathObservation], mode: OrderingMode) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..paths.len()).collect();
    match mode {
        OrderingMode::DelayAscending => idx.sort_by(|&a, &b| paths[a].toa.total_cmp(&paths[b].toa)),
        OrderingMode::AmplitudeDescending => idx.sort_by(|&a, &b| paths[b].gain.total_cmp(&paths[a].gain)),
    }
    idx
}

pub fn order_paths(paths: &[PathObservation], mode: OrderingMode) -> Vec<PathObservation> {
    ordering_permutation(paths, mode).into_iter().map(|i| paths[i]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub position: Vec3,
    /// Seconds.
    pub clock_bias: f64,
    pub paths_used: usize,
    pub residual_series: ResidualSeries,
    pub detection: DetectionOutcome,
    /// Entry `i` (0-based) is the estimate from the first `i + 2` ordered paths.
    pub per_step_estimates: Vec<EstimateVector>,
    pub fallback_all_paths: bool,
    /// The estimate the final position was taken from.
    pub estimate: EstimateVector,
    /// Paths in processing order.
    pub ordered_paths: Vec<PathObservation>,
}

/// Residuals `Δ_t = ‖p^(t) − p^(1)‖` for every prefix of already ordered
/// paths, without stopping. Used for calibration.
pub fn residual_series(
    ordered: &[PathObservation],
    tx: &Vec3,
    weight_mode: WeightMode,
) -> Result<(ResidualSeries, Vec<EstimateVector>)> {
    if ordered.len() < 2 {
        return Err(Error::InsufficientPaths {
            required: 2,
            found: ordered.len(),
        });
    }
    let mut steps = Vec::with_capacity(ordered.len() - 1);
    let mut series = ResidualSeries::default();
    for used in 2..=ordered.len() {
        let est = estimate_position(&ordered[..used], tx, weight_mode)?;
        let delta = steps
            .first()
            .map_or(0.0, |first: &EstimateVector| (est.position() - first.position()).norm());
        series.push(delta)?;
        steps.push(est);
    }
    Ok((series, steps))
}

/// Runs the full iterative estimator on an unordered set of paths from a
/// transmitter at `tx`.
pub fn run(
    paths: &[PathObservation],
    tx: &Vec3,
    mode: OrderingMode,
    weight_mode: WeightMode,
    detector: &DetectorConfig,
) -> Result<LocalizationResult> {
    if paths.len() < 2 {
        return Err(Error::InsufficientPaths {
            required: 2,
            found: paths.len(),
        });
    }
    let ordered = order_paths(paths, mode);
    let total = ordered.len();

    let mut online = OnlineGlrt::new(*detector)?;
    let mut steps = vec![estimate_position(&ordered[..2], tx, weight_mode)?];
    online.push(0.0)?;

    let mut change_point = None;
    for used in 3..=total {
        let est = estimate_position(&ordered[..used], tx, weight_mode)?;
        let delta = (est.position() - steps[0].position()).norm();
        steps.push(est);
        if let Some(out) = online.push(delta)? {
            change_point = out.change_point;
            break;
        }
    }

    // residual i comes from the first i + 1 paths; κ̂ is the last pre-change residual
    let selected = match change_point {
        Some(k) => (k + 1).max(2),
        None => total,
    };
    let mut step = selected - 2;
    if !steps[step].position_identifiable {
        if let Some(j) = (0..step).find(|&j| steps[j].position_identifiable) {
            step = j;
        }
    }
    let estimate = steps[step].clone();
    Ok(LocalizationResult {
        position: estimate.position(),
        clock_bias: estimate.clock_bias,
        paths_used: step + 2,
        residual_series: online.series().clone(),
        detection: online.outcome(),
        per_step_estimates: steps,
        fallback_all_paths: total > 2 && change_point.is_none(),
        estimate,
        ordered_paths: ordered,
    })
}
