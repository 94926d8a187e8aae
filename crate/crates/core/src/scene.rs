//! Planar-mirror scenes and image-source path enumeration.

use crate::error::{Error, Result};
use crate::geometry::{apply_noise, path_parameters, GroundTruthPath, NoiseModel, PathObservation, Vec3};

/// Highest reflection order the enumerator supports.
pub const MAX_BOUNCE_ORDER: usize = 3;

const PLANE_CLEARANCE: f64 = 1e-9;

/// An infinite or rectangular planar mirror.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflector {
    pub anchor: Vec3,
    pub normal: Vec3,
    /// Half-extents along the in-plane axes `(u, v)` returned by [`Reflector::plane_axes`].
    pub half_extents: Option<[f64; 2]>,
}

impl Reflector {
    /// Unbounded plane through `anchor`. The normal is normalized.
    pub fn new(anchor: Vec3, normal: Vec3) -> Result<Self> {
        if !anchor.iter().chain(normal.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("reflector"));
        }
        let n = normal.norm();
        if n == 0.0 {
            return Err(Error::InvalidInput("reflector normal is zero".into()));
        }
        Ok(Self {
            anchor,
            normal: normal / n,
            half_extents: None,
        })
    }

    /// Rectangle centred on `anchor` with the given half-extents along the
    /// in-plane axes.
    pub fn bounded(anchor: Vec3, normal: Vec3, half_u: f64, half_v: f64) -> Result<Self> {
        if !(half_u > 0.0 && half_v > 0.0 && half_u.is_finite() && half_v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "half-extents must be positive, got ({half_u}, {half_v})"
            )));
        }
        let mut r = Self::new(anchor, normal)?;
        r.half_extents = Some([half_u, half_v]);
        Ok(r)
    }

    /// In-plane axes. `u` is horizontal (`ẑ × n`) unless the plane itself is
    /// horizontal, in which case `u = x̂`; `v = n × u`.
    pub fn plane_axes(&self) -> (Vec3, Vec3) {
        let zc = Vec3::z().cross(&self.normal);
        let u = if zc.norm() < 1e-9 {
            Vec3::x()
        } else {
            zc.normalize()
        };
        let v = self.normal.cross(&u);
        (u, v)
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        (p - self.anchor).dot(&self.normal)
    }

    /// Rectangle containment of an in-plane point; always true when unbounded.
    pub fn contains(&self, p: &Vec3) -> bool {
        match self.half_extents {
            None => true,
            Some([hu, hv]) => {
                let (u, v) = self.plane_axes();
                let d = p - self.anchor;
                d.dot(&u).abs() <= hu && d.dot(&v).abs() <= hv
            }
        }
    }
}

pub fn mirror_point(p: &Vec3, r: &Reflector) -> Vec3 {
    p - 2.0 * r.signed_distance(p) * r.normal
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub tx: Vec3,
    pub rx: Vec3,
    /// Seconds.
    pub clock_bias: f64,
    pub reflectors: Vec<Reflector>,
    pub max_bounce_order: usize,
    pub los_enabled: bool,
    /// Amplitude at 1 m.
    pub gain_reference: f64,
    /// Per-bounce amplitude factor in (0, 1].
    pub reflection_loss: f64,
}

impl Scene {
    pub fn new(tx: Vec3, rx: Vec3, clock_bias: f64, reflectors: Vec<Reflector>) -> Self {
        Self {
            tx,
            rx,
            clock_bias,
            reflectors,
            max_bounce_order: 1,
            los_enabled: true,
            gain_reference: 1.0,
            reflection_loss: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.tx.iter().chain(self.rx.iter()).all(|v| v.is_finite())
            || !self.clock_bias.is_finite()
        {
            return Err(Error::NonFinite("scene"));
        }
        if self.tx == self.rx {
            return Err(Error::DegenerateGeometry("tx and rx coincide".into()));
        }
        if self.max_bounce_order > MAX_BOUNCE_ORDER {
            return Err(Error::InvalidInput(format!(
                "max_bounce_order {} exceeds {MAX_BOUNCE_ORDER}",
                self.max_bounce_order
            )));
        }
        if !(self.gain_reference.is_finite() && self.gain_reference >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "gain reference {}",
                self.gain_reference
            )));
        }
        if !(self.reflection_loss > 0.0 && self.reflection_loss <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "reflection loss {} outside (0, 1]",
                self.reflection_loss
            )));
        }
        for (i, r) in self.reflectors.iter().enumerate() {
            if (r.normal.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("reflector {i}: normal not unit")));
            }
            if let Some([hu, hv]) = r.half_extents {
                if !(hu > 0.0 && hv > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "reflector {i}: non-positive half-extent"
                    )));
                }
            }
            for (name, p) in [("tx", &self.tx), ("rx", &self.rx)] {
                if r.signed_distance(p).abs() < PLANE_CLEARANCE {
                    return Err(Error::DegenerateGeometry(format!(
                        "{name} lies on reflector {i}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Same scene with the receiver moved.
    pub fn with_rx(&self, rx: Vec3) -> Self {
        Self { rx, ..self.clone() }
    }
}

/// Back-traces one reflector sequence. Returns the incidence points in
/// propagation order, or `None` when the sequence is not a valid specular path.
fn trace_sequence(scene: &Scene, sequence: &[usize]) -> Option<Vec<Vec3>> {
    let mut images = Vec::with_capacity(sequence.len());
    let mut source = scene.tx;
    for &i in sequence {
        source = mirror_point(&source, &scene.reflectors[i]);
        images.push(source);
    }

    let mut points = Vec::with_capacity(sequence.len());
    let mut target = scene.rx;
    for (&i, image) in sequence.iter().zip(&images).rev() {
        let r = &scene.reflectors[i];
        let s_image = r.signed_distance(image);
        let s_target = r.signed_distance(&target);
        // the unfolded ray must cross the plane strictly
        if s_image * s_target >= 0.0
            || s_image.is_nan()
            || s_target.is_nan()
            || s_image.abs() < PLANE_CLEARANCE
            || s_target.abs() < PLANE_CLEARANCE
        {
            return None;
        }
        let q = image + (s_image / (s_image - s_target)) * (target - image);
        if !r.contains(&q) {
            return None;
        }
        points.push(q);
        target = q;
    }
    points.reverse();
    Some(points)
}

/// All ordered reflector sequences of the given length without immediate repeats.
fn sequences(reflectors: usize, length: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..length {
        out = out
            .into_iter()
            .flat_map(|seq| {
                (0..reflectors)
                    .filter(|&r| seq.last() != Some(&r))
                    .map(|r| {
                        let mut s = seq.clone();
                        s.push(r);
                        s
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    out
}

/// Image-source enumeration of every LOS and specular path up to the scene's
/// bounce order, sorted by TOA (stable).
pub fn enumerate_paths(scene: &Scene) -> Result<Vec<GroundTruthPath>> {
    scene.validate()?;
    let mut paths = Vec::new();
    let min_order = if scene.los_enabled { 0 } else { 1 };
    for order in min_order..=scene.max_bounce_order {
        for seq in sequences(scene.reflectors.len(), order) {
            let Some(points) = trace_sequence(scene, &seq) else {
                continue;
            };
            let mut path = match path_parameters(&points, &scene.tx, &scene.rx, scene.clock_bias, 0.0) {
                Ok(p) => p,
                Err(Error::DegenerateGeometry(_)) => continue,
                Err(e) => return Err(e),
            };
            path.observation.gain = scene.gain_reference / path.propagation_distance
                * scene.reflection_loss.powi(order as i32);
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.observation.toa.total_cmp(&b.observation.toa));
    Ok(paths)
}

/// Enumerates the scene and perturbs the observations. The truth list is
/// index-aligned with the noisy observations.
pub fn observations_from_scene(
    scene: &Scene,
    noise: &NoiseModel,
) -> Result<(Vec<PathObservation>, Vec<GroundTruthPath>)> {
    let truth = enumerate_paths(scene)?;
    if truth.len() < 2 {
        return Err(Error::InsufficientPaths {
            required: 2,
            found: truth.len(),
        });
    }
    let clean: Vec<PathObservation> = truth.iter().map(|p| p.observation).collect();
    Ok((apply_noise(&clean, noise), truth))
}
