//! Position and clock-bias error summaries.
//!
//! Two flavours are reported side by side:
//! - `literal`: `√(Σ‖err‖ / K)`, the square root of the mean error norm;
//! - `conventional`: `√(Σ‖err‖² / K)`, the usual root-mean-square error.
//!
//! Clock-bias errors are expressed in nanoseconds before either formula is
//! applied, so both clock-bias values carry nanosecond-based units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rmse {
    pub literal: f64,
    pub conventional: f64,
}

impl Rmse {
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::InvalidInput("no estimates to summarize".into()));
        }
        if errors.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite("estimation errors"));
        }
        let k = errors.len() as f64;
        let mean_abs = errors.iter().map(|e| e.abs()).sum::<f64>() / k;
        let mean_sq = errors.iter().map(|e| e * e).sum::<f64>() / k;
        Ok(Self {
            literal: mean_abs.sqrt(),
            conventional: mean_sq.sqrt(),
        })
    }
}

/// Position errors in meters.
pub fn rmse_position(estimates: &[Vec3], truth: &Vec3) -> Result<Rmse> {
    let errors: Vec<f64> = estimates.iter().map(|e| (e - truth).norm()).collect();
    Rmse::from_errors(&errors)
}

/// Clock-bias estimates and truth in seconds; result in nanosecond units.
pub fn rmse_clock_bias(estimates: &[f64], truth: f64) -> Result<Rmse> {
    let errors: Vec<f64> = estimates.iter().map(|e| (e - truth) * 1e9).collect();
    Rmse::from_errors(&errors)
}
