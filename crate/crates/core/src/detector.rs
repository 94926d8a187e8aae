//! GLRT detection of a slope change in the mean of the positioning-residual
//! sequence.
//!
//! Under H₀ every `Δ_i ~ N(μ, σ²)`. Under H₁ the mean grows linearly after an
//! unknown change point `κ`: `Δ_i ~ N(μ + s(i − κ), σ²)` for `i > κ`. With
//! `τ = t − k`,
//!
//! ```text
//! ŝ_{k,t}  = Σ_{i=k+1..t} (i−k)(Δ_i − μ) / Σ_{i=k+1..t} (i−k)²
//! W_{k,t}  = Σ_{i=k+1..t} (i−k)(Δ_i − μ) / σ
//! A_τ      = τ(τ+1)(2τ+1)/6
//! U_{k,t}  = W_{k,t} / √A_τ
//! t*       = inf { t : max_k U²_{k,t}/2 ≥ h }
//! ```
//!
//! Series are indexed from 1 throughout this module.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Ordered residuals `Δ_1, Δ_2, …` in meters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualSeries {
    values: Vec<f64>,
}

impl ResidualSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for v in &values {
            check_residual(*v)?;
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Δ_i` for 1-based `i`.
    pub fn get(&self, i: usize) -> Option<f64> {
        i.checked_sub(1).and_then(|j| self.values.get(j).copied())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn push(&mut self, value: f64) -> Result<()> {
        check_residual(value)?;
        self.values.push(value);
        Ok(())
    }
}

fn check_residual(v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFinite("residual"));
    }
    if v < 0.0 {
        return Err(Error::InvalidInput(format!("negative residual {v}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// H₀ mean μ, meters.
    pub baseline_mean: f64,
    /// H₀ standard deviation σ, meters.
    pub baseline_sigma: f64,
    /// Threshold h on `U²/2`.
    pub threshold: f64,
    /// Smallest `t − k` considered.
    pub min_post_samples: usize,
}

/// Lower clamp for a calibrated σ.
pub const SIGMA_FLOOR: f64 = 1e-6;

impl DetectorConfig {
    pub fn new(baseline_mean: f64, baseline_sigma: f64, threshold: f64, min_post_samples: usize) -> Result<Self> {
        let cfg = Self {
            baseline_mean,
            baseline_sigma,
            threshold,
            min_post_samples,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.baseline_mean.is_finite() {
            return Err(Error::NonFinite("baseline mean"));
        }
        if !(self.baseline_sigma.is_finite() && self.baseline_sigma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "baseline sigma must be positive, got {}",
                self.baseline_sigma
            )));
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::InvalidInput(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if self.min_post_samples < 1 {
            return Err(Error::InvalidInput("min_post_samples must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            baseline_mean: 0.0,
            baseline_sigma: SIGMA_FLOOR,
            threshold: threshold_for_alpha(0.05, 10).expect("valid constants"),
            min_post_samples: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub detected: bool,
    /// `t*`.
    pub stop_index: Option<usize>,
    /// `κ̂`, the last pre-change index.
    pub change_point: Option<usize>,
    /// `ŝ_{κ̂,t*}` in meters per step.
    pub slope_estimate: Option<f64>,
    /// `max_k U²_{k,t}/2` at `t*`; without a detection, the largest value seen.
    pub statistic: f64,
}

impl DetectionOutcome {
    pub fn none() -> Self {
        Self {
            detected: false,
            stop_index: None,
            change_point: None,
            slope_estimate: None,
            statistic: 0.0,
        }
    }
}

fn check_indices(series: &ResidualSeries, k: usize, t: usize) -> Result<()> {
    if k < 1 || k >= t || t > series.len() {
        return Err(Error::Index {
            k,
            t,
            len: series.len(),
        });
    }
    Ok(())
}

/// Maximum-likelihood slope after an assumed change at `k`.
pub fn slope_mle(series: &ResidualSeries, k: usize, t: usize, mean: f64) -> Result<f64> {
    check_indices(series, k, t)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in k + 1..=t {
        let lag = (i - k) as f64;
        num += lag * (series.values[i - 1] - mean);
        den += lag * lag;
    }
    Ok(num / den)
}

/// `Σ_{i=1..τ} i²`.
pub fn sum_of_squares(tau: usize) -> f64 {
    let tau = tau as f64;
    tau * (tau + 1.0) * (2.0 * tau + 1.0) / 6.0
}

fn statistic_unchecked(values: &[f64], k: usize, t: usize, config: &DetectorConfig) -> f64 {
    let mut w = 0.0;
    for i in k + 1..=t {
        w += (i - k) as f64 * (values[i - 1] - config.baseline_mean) / config.baseline_sigma;
    }
    w * w / sum_of_squares(t - k) / 2.0
}

/// `U²_{k,t} / 2`.
pub fn glrt_statistic(series: &ResidualSeries, k: usize, t: usize, config: &DetectorConfig) -> Result<f64> {
    check_indices(series, k, t)?;
    Ok(statistic_unchecked(&series.values, k, t, config))
}

/// Incremental form of [`detect`]: feed residuals one at a time and stop at
/// the first crossing.
#[derive(Debug, Clone)]
pub struct OnlineGlrt {
    config: DetectorConfig,
    series: ResidualSeries,
    best: f64,
    outcome: Option<DetectionOutcome>,
}

impl OnlineGlrt {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            series: ResidualSeries::default(),
            best: 0.0,
            outcome: None,
        })
    }

    pub fn series(&self) -> &ResidualSeries {
        &self.series
    }

    /// Appends `Δ_t` and evaluates time `t`. Returns the outcome once the
    /// threshold has been crossed; later pushes keep returning it unchanged.
    pub fn push(&mut self, delta: f64) -> Result<Option<&DetectionOutcome>> {
        if self.outcome.is_some() {
            return Ok(self.outcome.as_ref());
        }
        self.series.push(delta)?;
        let t = self.series.len();
        if t < 2 || t <= self.config.min_post_samples {
            return Ok(None);
        }
        let mut max_stat = f64::NEG_INFINITY;
        let mut arg = 0;
        for k in 1..=t - self.config.min_post_samples {
            let s = statistic_unchecked(&self.series.values, k, t, &self.config);
            if s > max_stat {
                max_stat = s;
                arg = k;
            }
        }
        self.best = self.best.max(max_stat);
        if max_stat >= self.config.threshold {
            let slope = slope_mle(&self.series, arg, t, self.config.baseline_mean)?;
            self.outcome = Some(DetectionOutcome {
                detected: true,
                stop_index: Some(t),
                change_point: Some(arg),
                slope_estimate: Some(slope),
                statistic: max_stat,
            });
        }
        Ok(self.outcome.as_ref())
    }

    pub fn outcome(&self) -> DetectionOutcome {
        self.outcome.clone().unwrap_or(DetectionOutcome {
            statistic: self.best,
            ..DetectionOutcome::none()
        })
    }
}

/// Scans `t = 2..len` and stops at the first `t` whose maximal statistic over
/// `k ∈ [1, t − min_post_samples]` reaches the threshold. Ties in `k` go to the
/// smallest index.
pub fn detect(series: &ResidualSeries, config: &DetectorConfig) -> Result<DetectionOutcome> {
    let mut online = OnlineGlrt::new(*config)?;
    for v in series.values() {
        if online.push(*v)?.is_some() {
            break;
        }
    }
    Ok(online.outcome())
}

/// Threshold on `U²/2` keeping the family-wise false-alarm probability over
/// all `(k, t)` pairs up to `horizon` below `alpha` (Bonferroni, two-sided).
pub fn threshold_for_alpha(alpha: f64, horizon: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (0, 1)")));
    }
    if horizon < 2 {
        return Err(Error::InvalidInput(format!("horizon {horizon} below 2")));
    }
    let pairs = (horizon * (horizon - 1) / 2) as f64;
    let per_pair = alpha / pairs;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let z = normal.inverse_cdf(1.0 - per_pair / 2.0);
    Ok(0.5 * z * z)
}
