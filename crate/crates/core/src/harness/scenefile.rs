//! JSON scene description.
//!
//! ```json
//! {
//!   "tx": [621.0, 447.0, 30.0],
//!   "rx": [600.0, 500.0, 1.5],
//!   "clock_bias_ns": 330.0,
//!   "reflectors": [
//!     { "anchor": [640.0, 500.0, 10.0], "normal": [-1.0, 0.0, 0.0], "half_extents": [40.0, 10.0] }
//!   ],
//!   "max_bounce_order": 2,
//!   "los": false,
//!   "rho": 0.5,
//!   "g0": 1.0
//! }
//! ```
//!
//! `half_extents` is optional (unbounded plane when absent) and is measured
//! along the in-plane axes of [`Reflector::plane_axes`](crate::scene::Reflector::plane_axes).
//! `los`, `rho` and `g0` default to `true`, `0.5` and `1.0`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Vec3;
use crate::scene::{Reflector, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectorFile {
    pub anchor: [f64; 3],
    pub normal: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_extents: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub tx: [f64; 3],
    pub rx: [f64; 3],
    pub clock_bias_ns: f64,
    #[serde(default)]
    pub reflectors: Vec<ReflectorFile>,
    #[serde(default = "default_order")]
    pub max_bounce_order: usize,
    #[serde(default = "default_true")]
    pub los: bool,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_g0")]
    pub g0: f64,
}

fn default_order() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_rho() -> f64 {
    0.5
}
fn default_g0() -> f64 {
    1.0
}

impl SceneFile {
    pub fn into_scene(self) -> Result<Scene> {
        let reflectors = self
            .reflectors
            .iter()
            .map(|r| match r.half_extents {
                Some([hu, hv]) => Reflector::bounded(Vec3::from(r.anchor), Vec3::from(r.normal), hu, hv),
                None => Reflector::new(Vec3::from(r.anchor), Vec3::from(r.normal)),
            })
            .collect::<Result<Vec<_>>>()?;
        let scene = Scene {
            tx: Vec3::from(self.tx),
            rx: Vec3::from(self.rx),
            clock_bias: self.clock_bias_ns * 1e-9,
            reflectors,
            max_bounce_order: self.max_bounce_order,
            los_enabled: self.los,
            gain_reference: self.g0,
            reflection_loss: self.rho,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn from_scene(scene: &Scene) -> Self {
        Self {
            tx: scene.tx.into(),
            rx: scene.rx.into(),
            clock_bias_ns: scene.clock_bias * 1e9,
            reflectors: scene
                .reflectors
                .iter()
                .map(|r| ReflectorFile {
                    anchor: r.anchor.into(),
                    normal: r.normal.into(),
                    half_extents: r.half_extents,
                })
                .collect(),
            max_bounce_order: scene.max_bounce_order,
            los: scene.los_enabled,
            rho: scene.reflection_loss,
            g0: scene.gain_reference,
        }
    }
}

pub fn parse_scene(text: &str) -> Result<Scene> {
    serde_json::from_str::<SceneFile>(text)?.into_scene()
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    parse_scene(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_scene() {
        let s = parse_scene(
            r#"{"tx":[0,0,0],"rx":[0,4,0],"clock_bias_ns":330,
                "reflectors":[{"anchor":[5,0,0],"normal":[2,0,0]}]}"#,
        )
        .unwrap();
        assert_eq!(s.clock_bias, 330e-9);
        assert_eq!(s.reflectors[0].normal, Vec3::x());
        assert!(s.los_enabled);
        assert_eq!(s.max_bounce_order, 1);
        assert_eq!(s.reflection_loss, 0.5);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        assert!(parse_scene(r#"{"tx":[0,0,0],"rx":[0,4,0],"clock_bias_ns":0,"bogus":1}"#).is_err());
        assert!(parse_scene(r#"{"tx":[0,0,0],"rx":[0,0,0],"clock_bias_ns":0}"#).is_err());
        assert!(parse_scene(r#"{"tx":[0,0,0],"rx":[0,4,0],"clock_bias_ns":0,"rho":1.5}"#).is_err());
    }
}
