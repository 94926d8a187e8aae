#![allow(dead_code)]

use std::path::PathBuf;

use nlospos_core::harness::load_scene;
use nlospos_core::{Reflector, Scene, Vec3};

pub fn canyon() -> Scene {
    load_scene(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenes/street_canyon.json")).unwrap()
}

/// The canyon's walls seen only through LOS and single bounces.
pub fn canyon_h0() -> Scene {
    let mut scene = canyon();
    scene.max_bounce_order = 1;
    scene.los_enabled = true;
    scene
}

/// The canyon's three single bounces without LOS.
pub fn canyon_walls_only() -> Scene {
    let mut scene = canyon_h0();
    scene.los_enabled = false;
    scene
}

/// Walls at azimuths `angles` (radians), distance `dist` from the origin,
/// facing inward, unbounded.
pub fn ring_scene(tx: Vec3, rx: Vec3, angles: &[f64], dist: f64, order: usize) -> Scene {
    let reflectors = angles
        .iter()
        .map(|a| {
            let out = Vec3::new(a.cos(), a.sin(), 0.0);
            Reflector::new(out * dist, -out).unwrap()
        })
        .collect();
    let mut scene = Scene::new(tx, rx, 250e-9, reflectors);
    scene.max_bounce_order = order;
    scene
}
