//! Fixtures shared by the benchmarks.

use nlospos_core::harness::scenefile::parse_scene;
use nlospos_core::scene::observations_from_scene;
use nlospos_core::{NoiseModel, PathObservation, ResidualSeries, Scene};

/// The street-canyon scene shipped in `scenes/`.
pub fn canyon() -> Scene {
    parse_scene(include_str!("../../../scenes/street_canyon.json")).expect("bundled scene parses")
}

/// Noisy observations of the canyon scene.
pub fn canyon_observations(seed: u64) -> Vec<PathObservation> {
    let noise = NoiseModel::new(0.01, 0.1, seed).expect("valid noise");
    observations_from_scene(&canyon(), &noise).expect("canyon has paths").0
}

/// A residual series with a linear ramp starting after `change`.
pub fn ramp_series(len: usize, change: usize, slope: f64) -> ResidualSeries {
    let values = (1..=len)
        .map(|i| if i > change { slope * (i - change) as f64 } else { 0.0 })
        .collect();
    ResidualSeries::new(values).expect("finite values")
}
