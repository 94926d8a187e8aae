mod common;

use nlospos_core::nalgebra::DVector;
use nlospos_core::scene::observations_from_scene;
use nlospos_core::wls::{build_system, path_weights, solve_wls, weighted_residual_norm};
use nlospos_core::{NoiseModel, WeightMode};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn residual_is_locally_minimal(seed in any::<u64>(), sa in 0.0..0.05f64) {
        let scene = common::canyon();
        let (obs, _) = observations_from_scene(&scene, &NoiseModel::new(sa, 1.0, seed).unwrap()).unwrap();
        let gains: Vec<f64> = obs.iter().map(|o| o.gain).collect();
        let system = build_system(&obs, &scene.tx, &path_weights(&gains, WeightMode::GainNormalized).unwrap()).unwrap();
        let mu = solve_wls(&system).unwrap().to_vector();
        let best = weighted_residual_norm(&system, &mu);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let dir = DVector::from_fn(mu.len(), |_, _| StandardNormal.sample(&mut rng));
            let step = dir.normalize() * 1e-4;
            prop_assert!(weighted_residual_norm(&system, &(&mu + step)) >= best * (1.0 - 1e-12));
        }
    }

    #[test]
    fn weight_scale_does_not_matter(seed in any::<u64>(), factor in 0.01..100.0f64) {
        let scene = common::canyon();
        let (obs, _) = observations_from_scene(&scene, &NoiseModel::new(0.01, 0.5, seed).unwrap()).unwrap();
        let w: Vec<f64> = obs.iter().map(|o| o.gain).collect();
        let scaled: Vec<f64> = w.iter().map(|v| v * factor).collect();
        let a = solve_wls(&build_system(&obs, &scene.tx, &w).unwrap()).unwrap();
        let b = solve_wls(&build_system(&obs, &scene.tx, &scaled).unwrap()).unwrap();
        prop_assert!((a.position() - b.position()).norm() < 1e-8);
        prop_assert!((a.clock_bias - b.clock_bias).abs() < 1e-16);
    }

    #[test]
    fn weights_are_normalized(gains in prop::collection::vec(0.001..10.0f64, 2..10)) {
        for mode in [WeightMode::GainNormalized, WeightMode::Uniform] {
            let w = path_weights(&gains, mode).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|v| *v > 0.0));
        }
    }
}
