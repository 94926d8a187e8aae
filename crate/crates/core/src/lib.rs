//! Single-anchor positioning and clock-bias estimation from multipath channel
//! parameters, with slope-change detection to drop multi-bounce paths.

pub mod detector;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod pipeline;
pub mod scene;
pub mod wls;

pub use detector::{DetectionOutcome, DetectorConfig, ResidualSeries};
pub use error::{Error, Result};
pub use geometry::{AnglePair, GroundTruthPath, NoiseModel, PathObservation, Vec3, SPEED_OF_LIGHT};
pub use pipeline::{LocalizationResult, OrderingMode};
pub use scene::{Reflector, Scene};
pub use wls::{EstimateVector, StackedSystem, WeightMode};

pub use nalgebra;
