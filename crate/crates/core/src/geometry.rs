//! Domain types and the forward geometric relations between positions,
//! incidence points and channel parameters.
//!
//! Angle conventions:
//! - AOD azimuth/elevation are measured at the transmitter toward the first
//!   incidence point (or the receiver for LOS).
//! - AOA azimuth carries a π offset: `φ_a = π + atan2(Δy, Δx)` where Δ points
//!   from the receiver toward the last incidence point. Elevation has no
//!   offset. [`direction_from_angles_rx`] undoes the offset, so the returned
//!   vector points from the receiver toward the last incidence point.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Vec3 = nalgebra::Vector3<f64>;

/// Wraps an azimuth into (−π, π]. Values already in range are returned
/// unchanged, bit for bit.
pub fn normalize_azimuth(azimuth: f64) -> f64 {
    if azimuth > -PI && azimuth <= PI {
        return azimuth;
    }
    let r = azimuth.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePair {
    pub azimuth: f64,
    pub elevation: f64,
}

impl AnglePair {
    /// Builds a pair, wrapping the azimuth. Elevations outside [−π/2, π/2]
    /// are rejected.
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !azimuth.is_finite() || !elevation.is_finite() {
            return Err(Error::NonFinite("angle pair"));
        }
        if elevation.abs() > FRAC_PI_2 {
            return Err(Error::InvalidInput(format!(
                "elevation {elevation} outside [-pi/2, pi/2]"
            )));
        }
        Ok(Self {
            azimuth: normalize_azimuth(azimuth),
            elevation,
        })
    }

    /// Builds a pair from arbitrary finite angles by folding the elevation
    /// back over the pole (which flips the azimuth by π).
    pub fn folded(azimuth: f64, elevation: f64) -> Self {
        let mut az = azimuth;
        let mut el = elevation;
        if el.abs() > FRAC_PI_2 {
            el = normalize_azimuth(el);
            if el > FRAC_PI_2 {
                el = PI - el;
                az += PI;
            } else if el < -FRAC_PI_2 {
                el = -PI - el;
                az += PI;
            }
        }
        Self {
            azimuth: normalize_azimuth(az),
            elevation: el,
        }
    }
}

/// Measured parameters of one multipath component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathObservation {
    /// Linear amplitude.
    pub gain: f64,
    pub aod: AnglePair,
    pub aoa: AnglePair,
    /// Time of arrival in seconds, clock bias included.
    pub toa: f64,
}

impl PathObservation {
    pub fn validate(&self) -> Result<()> {
        let values = [
            self.gain,
            self.aod.azimuth,
            self.aod.elevation,
            self.aoa.azimuth,
            self.aoa.elevation,
            self.toa,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("path observation"));
        }
        if self.gain < 0.0 {
            return Err(Error::InvalidInput(format!("negative gain {}", self.gain)));
        }
        if self.toa <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "non-positive toa {}",
                self.toa
            )));
        }
        for pair in [self.aod, self.aoa] {
            if pair.elevation.abs() > FRAC_PI_2 {
                return Err(Error::InvalidInput(format!(
                    "elevation {} outside [-pi/2, pi/2]",
                    pair.elevation
                )));
            }
            if !(pair.azimuth > -PI && pair.azimuth <= PI) {
                return Err(Error::InvalidInput(format!(
                    "azimuth {} outside (-pi, pi]",
                    pair.azimuth
                )));
            }
        }
        Ok(())
    }
}

/// A synthesized path together with the geometry that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthPath {
    pub observation: PathObservation,
    pub bounce_count: usize,
    /// Incidence points in propagation order, empty for LOS.
    pub incidence_points: Vec<Vec3>,
    /// Total propagation distance in meters.
    pub propagation_distance: f64,
}

impl GroundTruthPath {
    pub fn first_incidence(&self) -> Option<Vec3> {
        self.incidence_points.first().copied()
    }

    pub fn last_incidence(&self) -> Option<Vec3> {
        self.incidence_points.last().copied()
    }

    /// `p_d − p_a`: zero for LOS and single-bounce paths.
    pub fn incidence_offset(&self) -> Vec3 {
        match (self.first_incidence(), self.last_incidence()) {
            (Some(d), Some(a)) => d - a,
            _ => Vec3::zeros(),
        }
    }

    /// LOS or single bounce: the paths the linear model describes exactly.
    pub fn is_single_bounce_or_los(&self) -> bool {
        self.bounce_count <= 1
    }
}

/// Gaussian measurement noise on angles (radians) and range (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_angle: f64,
    pub sigma_range: f64,
    pub rng_seed: u64,
}

impl NoiseModel {
    pub fn new(sigma_angle: f64, sigma_range: f64, rng_seed: u64) -> Result<Self> {
        if !(sigma_angle.is_finite() && sigma_angle >= 0.0) {
            return Err(Error::InvalidInput(format!("sigma_angle {sigma_angle}")));
        }
        if !(sigma_range.is_finite() && sigma_range >= 0.0) {
            return Err(Error::InvalidInput(format!("sigma_range {sigma_range}")));
        }
        Ok(Self {
            sigma_angle,
            sigma_range,
            rng_seed,
        })
    }

    pub fn noiseless() -> Self {
        Self {
            sigma_angle: 0.0,
            sigma_range: 0.0,
            rng_seed: 0,
        }
    }
}

/// Unit vector along the departure direction.
pub fn direction_from_angles_tx(aod: &AnglePair) -> Vec3 {
    let (sin_el, cos_el) = aod.elevation.sin_cos();
    let (sin_az, cos_az) = aod.azimuth.sin_cos();
    Vec3::new(cos_el * cos_az, cos_el * sin_az, sin_el)
}

/// Unit vector from the receiver toward the last incidence point.
pub fn direction_from_angles_rx(aoa: &AnglePair) -> Vec3 {
    let (sin_el, cos_el) = aoa.elevation.sin_cos();
    let (sin_az, cos_az) = aoa.azimuth.sin_cos();
    Vec3::new(-cos_el * cos_az, -cos_el * sin_az, sin_el)
}

fn azimuth_elevation(delta: &Vec3) -> Result<(f64, f64)> {
    if !delta.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("point coordinates"));
    }
    if delta.norm() == 0.0 {
        return Err(Error::DegenerateGeometry("coincident points".into()));
    }
    let horizontal = delta.x.hypot(delta.y);
    // atan2 form of asin(dz / |d|); better conditioned near the poles
    let elevation = delta.z.atan2(horizontal);
    let azimuth = if horizontal == 0.0 {
        0.0
    } else {
        delta.y.atan2(delta.x)
    };
    Ok((azimuth, elevation))
}

pub fn angles_of_departure(scatter: &Vec3, tx: &Vec3) -> Result<AnglePair> {
    let (azimuth, elevation) = azimuth_elevation(&(scatter - tx))?;
    Ok(AnglePair {
        azimuth: normalize_azimuth(azimuth),
        elevation,
    })
}

pub fn angles_of_arrival(scatter: &Vec3, rx: &Vec3) -> Result<AnglePair> {
    let delta = scatter - rx;
    let (azimuth, elevation) = azimuth_elevation(&delta)?;
    let azimuth = if delta.x == 0.0 && delta.y == 0.0 {
        0.0
    } else {
        normalize_azimuth(PI + azimuth)
    };
    Ok(AnglePair { azimuth, elevation })
}

/// Builds the channel parameters of the polyline `tx → incidence points → rx`.
pub fn path_parameters(
    incidence_points: &[Vec3],
    tx: &Vec3,
    rx: &Vec3,
    clock_bias: f64,
    gain: f64,
) -> Result<GroundTruthPath> {
    let mut distance = 0.0;
    let mut prev = *tx;
    for p in incidence_points.iter().chain(std::iter::once(rx)) {
        let seg = (p - prev).norm();
        if !seg.is_finite() {
            return Err(Error::NonFinite("path polyline"));
        }
        if seg == 0.0 {
            return Err(Error::DegenerateGeometry(
                "consecutive polyline points coincide".into(),
            ));
        }
        distance += seg;
        prev = *p;
    }
    let first = incidence_points.first().unwrap_or(rx);
    let last = incidence_points.last().unwrap_or(tx);
    let observation = PathObservation {
        gain,
        aod: angles_of_departure(first, tx)?,
        aoa: angles_of_arrival(last, rx)?,
        toa: distance / SPEED_OF_LIGHT + clock_bias,
    };
    Ok(GroundTruthPath {
        observation,
        bounce_count: incidence_points.len(),
        incidence_points: incidence_points.to_vec(),
        propagation_distance: distance,
    })
}

/// Perturbs the four angles and the TOA of every path with independent
/// Gaussian draws. Gains are left untouched. Deterministic in `rng_seed`.
pub fn apply_noise(paths: &[PathObservation], noise: &NoiseModel) -> Vec<PathObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.rng_seed);
    paths
        .iter()
        .map(|p| {
            let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
            let aod_az = p.aod.azimuth + noise.sigma_angle * draw();
            let aod_el = p.aod.elevation + noise.sigma_angle * draw();
            let aoa_az = p.aoa.azimuth + noise.sigma_angle * draw();
            let aoa_el = p.aoa.elevation + noise.sigma_angle * draw();
            let range_err = noise.sigma_range * draw();
            PathObservation {
                gain: p.gain,
                aod: AnglePair::folded(aod_az, aod_el),
                aoa: AnglePair::folded(aoa_az, aoa_el),
                toa: p.toa + range_err / SPEED_OF_LIGHT,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn tx_direction_axis_cases() {
        let d = direction_from_angles_tx(&AnglePair::new(0.0, 0.0).unwrap());
        assert_abs_diff_eq!(d, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        let d = direction_from_angles_tx(&AnglePair::new(FRAC_PI_2, 0.0).unwrap());
        assert_abs_diff_eq!(d, Vec3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn tx_direction_toward_scatter() {
        // (5,2,0)/sqrt(29)
        let d = direction_from_angles_tx(&AnglePair::new(2f64.atan2(5.0), 0.0).unwrap());
        assert_abs_diff_eq!(d, Vec3::new(0.928_476_690_885_259_4, 0.371_390_676_354_103_7, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn rx_direction_undoes_offset() {
        let d = direction_from_angles_rx(&AnglePair::new(PI + FRAC_PI_2, 0.0).unwrap());
        assert_abs_diff_eq!(d, Vec3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
        let d = direction_from_angles_rx(&AnglePair::new(0.0, FRAC_PI_2).unwrap());
        assert_abs_diff_eq!(d, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn departure_angles() {
        let a = angles_of_departure(&Vec3::new(5.0, 2.0, 0.0), &Vec3::zeros()).unwrap();
        assert_abs_diff_eq!(a.azimuth, 0.380_506_377_112_364_9, epsilon = 1e-15);
        assert_eq!(a.elevation, 0.0);
        let a = angles_of_departure(&Vec3::new(0.0, 0.0, 1.0), &Vec3::zeros()).unwrap();
        assert_eq!(a.elevation, FRAC_PI_2);
        assert_eq!(a.azimuth, 0.0);
        assert!(matches!(
            angles_of_departure(&Vec3::zeros(), &Vec3::zeros()),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn arrival_angles() {
        let a = angles_of_arrival(&Vec3::new(1.0, 0.0, 0.0), &Vec3::zeros()).unwrap();
        assert_eq!(a.azimuth, PI);
        assert_eq!(a.elevation, 0.0);
        let a = angles_of_arrival(&Vec3::new(0.0, 0.0, -1.0), &Vec3::zeros()).unwrap();
        assert_eq!(a.elevation, -FRAC_PI_2);
        assert_eq!(a.azimuth, 0.0);
        assert!(angles_of_arrival(&Vec3::new(1.0, 1.0, 1.0), &Vec3::new(1.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn azimuth_normalization() {
        assert_eq!(normalize_azimuth(-PI), PI);
        assert_abs_diff_eq!(normalize_azimuth(3.0 * PI / 2.0), -FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(normalize_azimuth(0.25), 0.25);
    }

    #[test]
    fn folded_elevation_keeps_direction() {
        let raw = AnglePair { azimuth: 0.3, elevation: FRAC_PI_2 + 0.1 };
        let f = AnglePair::folded(raw.azimuth, raw.elevation);
        assert!(f.elevation.abs() <= FRAC_PI_2);
        assert_abs_diff_eq!(direction_from_angles_tx(&f), direction_from_angles_tx(&raw), epsilon = 1e-14);
    }

    #[test]
    fn single_bounce_distance() {
        let p = path_parameters(
            &[Vec3::new(5.0, 2.0, 0.0)],
            &Vec3::zeros(),
            &Vec3::new(0.0, 4.0, 0.0),
            0.0,
            1.0,
        )
        .unwrap();
        assert_abs_diff_eq!(p.propagation_distance, 116f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(p.propagation_distance, 2.0 * 29f64.sqrt(), epsilon = 1e-12);
        assert_eq!(p.bounce_count, 1);
    }

    #[test]
    fn los_distance_and_toa() {
        let p = path_parameters(&[], &Vec3::zeros(), &Vec3::new(3.0, 4.0, 0.0), 0.0, 1.0).unwrap();
        assert_eq!(p.propagation_distance, 5.0);
        assert_eq!(p.observation.toa, 5.0 / SPEED_OF_LIGHT);
        assert_eq!(p.bounce_count, 0);
        // aoa points back toward tx
        let f_r = direction_from_angles_rx(&p.observation.aoa);
        assert_abs_diff_eq!(f_r, Vec3::new(-0.6, -0.8, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn clock_bias_shifts_toa() {
        let tb = 330e-9;
        let pts = [Vec3::new(5.0, 2.0, 1.0)];
        let a = path_parameters(&pts, &Vec3::zeros(), &Vec3::new(0.0, 4.0, 0.0), 0.0, 1.0).unwrap();
        let b = path_parameters(&pts, &Vec3::zeros(), &Vec3::new(0.0, 4.0, 0.0), tb, 1.0).unwrap();
        assert_abs_diff_eq!(b.observation.toa - a.observation.toa, tb, epsilon = 1e-20);
    }

    #[test]
    fn degenerate_polyline_rejected() {
        let r = path_parameters(&[Vec3::zeros()], &Vec3::zeros(), &Vec3::new(1.0, 0.0, 0.0), 0.0, 1.0);
        assert!(matches!(r, Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn reversing_incidence_points_keeps_distance() {
        let pts = [Vec3::new(5.0, 2.0, 1.0), Vec3::new(-3.0, 6.0, 2.0)];
        let rev = [pts[1], pts[0]];
        let tx = Vec3::zeros();
        let rx = Vec3::new(0.0, 4.0, 0.0);
        let a = path_parameters(&pts, &tx, &rx, 0.0, 1.0).unwrap();
        let b = path_parameters(&rev, &tx, &rx, 0.0, 1.0).unwrap();
        assert_ne!(a.observation.aod, b.observation.aod);
        assert_ne!(a.observation.aoa, b.observation.aoa);
        // both polylines have the same length here only by coincidence of the
        // chosen points; the invariant is about the set of segments
        let seg = |p: &[Vec3]| -> f64 {
            let mut all = vec![tx];
            all.extend_from_slice(p);
            all.push(rx);
            all.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
        };
        assert_abs_diff_eq!(a.propagation_distance, seg(&pts), epsilon = 1e-12);
        assert_abs_diff_eq!(b.propagation_distance, seg(&rev), epsilon = 1e-12);
    }

    fn sample_obs() -> Vec<PathObservation> {
        let tx = Vec3::new(621.0, 447.0, 30.0);
        let rx = Vec3::new(600.0, 500.0, 1.5);
        [Vec3::new(640.0, 520.0, 10.0), Vec3::new(580.0, 470.0, 5.0)]
            .iter()
            .map(|p| path_parameters(&[*p], &tx, &rx, 330e-9, 0.5).unwrap().observation)
            .collect()
    }

    #[test]
    fn zero_noise_is_identity() {
        let obs = sample_obs();
        let noisy = apply_noise(&obs, &NoiseModel::new(0.0, 0.0, 99).unwrap());
        assert_eq!(obs, noisy);
    }

    #[test]
    fn noise_is_deterministic_in_seed() {
        let obs = sample_obs();
        let n = NoiseModel::new(0.01, 1.0, 7).unwrap();
        assert_eq!(apply_noise(&obs, &n), apply_noise(&obs, &n));
        let m = NoiseModel::new(0.01, 1.0, 8).unwrap();
        assert_ne!(apply_noise(&obs, &n), apply_noise(&obs, &m));
    }

    #[test]
    fn range_noise_standard_deviation() {
        let obs = vec![sample_obs()[0]; 100_000];
        let noisy = apply_noise(&obs, &NoiseModel::new(0.0, 0.1, 2024).unwrap());
        let errs: Vec<f64> = obs
            .iter()
            .zip(&noisy)
            .map(|(a, b)| SPEED_OF_LIGHT * (b.toa - a.toa))
            .collect();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (errs.len() - 1) as f64;
        let sd = var.sqrt();
        assert!((0.098..=0.102).contains(&sd), "sd = {sd}");
        assert!(noisy.iter().zip(&obs).all(|(a, b)| a.gain == b.gain));
    }

    #[test]
    fn negative_noise_sigma_rejected() {
        assert!(NoiseModel::new(-1.0, 0.0, 0).is_err());
        assert!(NoiseModel::new(0.0, f64::NAN, 0).is_err());
    }

    fn point() -> impl Strategy<Value = Vec3> {
        (-1e3..1e3f64, -1e3..1e3f64, -1e3..1e3f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn departure_round_trip(s in point(), t in point()) {
            prop_assume!((s - t).norm() > 1e-6);
            let f = direction_from_angles_tx(&angles_of_departure(&s, &t).unwrap());
            let expect = (s - t).normalize();
            prop_assert!((f - expect).norm() < 1e-12);
            prop_assert!((f.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn arrival_round_trip(s in point(), r in point()) {
            prop_assume!((s - r).norm() > 1e-6);
            let a = angles_of_arrival(&s, &r).unwrap();
            prop_assert!(a.azimuth > -PI && a.azimuth <= PI);
            let f = direction_from_angles_rx(&a);
            let expect = (s - r).normalize();
            prop_assert!((f - expect).norm() < 1e-12);
            prop_assert!((f.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn toa_unit_slope_in_clock_bias(b1 in 0.0..1e-6f64, db in 1e-12..1e-6f64) {
            let tx = Vec3::zeros();
            let rx = Vec3::new(10.0, 3.0, 1.0);
            let pts = [Vec3::new(4.0, 8.0, 2.0)];
            let a = path_parameters(&pts, &tx, &rx, b1, 1.0).unwrap();
            let b = path_parameters(&pts, &tx, &rx, b1 + db, 1.0).unwrap();
            prop_assert!(b.observation.toa > a.observation.toa);
            prop_assert!(((b.observation.toa - a.observation.toa) - db).abs() < 1e-18);
        }
    }
}
