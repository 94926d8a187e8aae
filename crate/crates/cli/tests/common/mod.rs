//! Reference implementations and generators shared by the integration tests.
//! Nothing here calls into the solver or detector under test.

#![allow(dead_code)]

use nlospos_core::nalgebra::{DMatrix, DVector};
use nlospos_core::scene::enumerate_paths;
use nlospos_core::{DetectorConfig, GroundTruthPath, Reflector, Scene, Vec3, SPEED_OF_LIGHT};
use rand::Rng;

/// Solves `(UᵀWU) μ = UᵀWδ` by Gauss-Jordan elimination with partial
/// pivoting. `row_weights` holds one weight per row.
pub fn normal_equations_solve(u: &DMatrix<f64>, row_weights: &[f64], delta: &DVector<f64>) -> Vec<f64> {
    let (m, n) = u.shape();
    let mut aug = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            aug[i][j] = (0..m).map(|r| u[(r, i)] * row_weights[r] * u[(r, j)]).sum();
        }
        aug[i][n] = (0..m).map(|r| u[(r, i)] * row_weights[r] * delta[r]).sum();
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
            .unwrap();
        aug.swap(col, pivot);
        let p = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    let pivot_row = aug[col].clone();
                    for (v, p) in aug[r].iter_mut().zip(&pivot_row) {
                        *v -= f * p;
                    }
                }
            }
        }
    }
    aug.iter().map(|row| row[n]).collect()
}

/// Numerical rank by Gaussian elimination with full pivoting after scaling
/// every column to unit norm.
pub fn rank(rows: &[Vec<f64>], rel_tol: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let n = rows[0].len();
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    for j in 0..n {
        let norm = a.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
        if norm > 0.0 {
            for r in a.iter_mut() {
                r[j] /= norm;
            }
        }
    }
    let m = a.len();
    let mut rank = 0;
    let mut first_pivot = None;
    let mut used_cols = vec![false; n];
    for row in 0..m.min(n) {
        let mut best = (0.0, row, 0);
        for (i, r) in a.iter().enumerate().skip(row) {
            for (j, v) in r.iter().enumerate() {
                if !used_cols[j] && v.abs() > best.0 {
                    best = (v.abs(), i, j);
                }
            }
        }
        let (mag, pi, pj) = best;
        let reference = *first_pivot.get_or_insert(mag);
        if mag <= rel_tol * reference || mag == 0.0 {
            break;
        }
        a.swap(row, pi);
        used_cols[pj] = true;
        rank += 1;
        let pivot_row = a[row].clone();
        for r in a.iter_mut().skip(row + 1) {
            let f = r[pj] / pivot_row[pj];
            for c in 0..n {
                r[c] -= f * pivot_row[c];
            }
        }
    }
    rank
}

/// Design-matrix rows rebuilt from truth geometry: per path,
/// `[I₃ | −cτ̂(f_t+f_r) | −c f_r | c(f_t+f_r)]` in the layout
/// `[p, ξ_1..ξ_N, τ_B, τ_ξ,1..τ_ξ,N]`.
pub fn geometric_design_rows(paths: &[GroundTruthPath], tx: &Vec3, rx: &Vec3) -> Vec<Vec<f64>> {
    let n = paths.len();
    let cols = 2 * n + 4;
    let mut rows = Vec::with_capacity(3 * n);
    for (k, p) in paths.iter().enumerate() {
        let (ft, fr) = match (p.first_incidence(), p.last_incidence()) {
            (Some(first), Some(last)) => ((first - tx).normalize(), (last - rx).normalize()),
            _ => {
                let d = (rx - tx).normalize();
                (d, -d)
            }
        };
        let s = ft + fr;
        for axis in 0..3 {
            let mut row = vec![0.0; cols];
            row[axis] = 1.0;
            row[3 + k] = -SPEED_OF_LIGHT * p.observation.toa * s[axis];
            row[3 + n] = -SPEED_OF_LIGHT * fr[axis];
            row[4 + n + k] = SPEED_OF_LIGHT * s[axis];
            rows.push(row);
        }
    }
    rows
}

/// Position and clock bias are identifiable when removing their four columns
/// drops the rank by exactly four.
pub fn position_identifiable(rows: &[Vec<f64>], paths: usize) -> bool {
    let full = rank(rows, 1e-9);
    let keep: Vec<usize> = (3..3 + paths).chain(4 + paths..4 + 2 * paths).collect();
    let reduced: Vec<Vec<f64>> = rows.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect();
    full - rank(&reduced, 1e-9) == 4
}

/// Exhaustive GLRT scan with the same summation order as the detector:
/// `(t*, κ̂, statistic)`.
pub fn brute_force_detect(values: &[f64], cfg: &DetectorConfig) -> (Option<usize>, Option<usize>, f64) {
    let stat = |k: usize, t: usize| -> f64 {
        let mut w = 0.0;
        for i in k + 1..=t {
            w += (i - k) as f64 * (values[i - 1] - cfg.baseline_mean) / cfg.baseline_sigma;
        }
        let tau = (t - k) as f64;
        w * w / (tau * (tau + 1.0) * (2.0 * tau + 1.0) / 6.0) / 2.0
    };
    let mut overall = 0.0_f64;
    for t in 2..=values.len() {
        if t <= cfg.min_post_samples {
            continue;
        }
        let all: Vec<f64> = (1..=t - cfg.min_post_samples).map(|k| stat(k, t)).collect();
        let max = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        overall = overall.max(max);
        if max >= cfg.threshold {
            let k = all.iter().position(|&s| s == max).unwrap() + 1;
            return (Some(t), Some(k), max);
        }
    }
    (None, None, overall)
}

/// A scene whose only paths are LOS (optional) and one single bounce per
/// wall, with 4 to 6 unbounded walls surrounding tx and rx.
pub fn random_single_bounce_scene<R: Rng>(rng: &mut R) -> Scene {
    loop {
        let tx = Vec3::new(rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), rng.random_range(5.0..30.0));
        let rx = Vec3::new(rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), rng.random_range(1.0..2.0));
        let walls = rng.random_range(4..=6);
        let mut reflectors = Vec::with_capacity(walls);
        for _ in 0..walls {
            let az: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let tilt: f64 = rng.random_range(-0.3..0.3);
            let outward = Vec3::new(az.cos(), az.sin(), tilt).normalize();
            let anchor = outward * rng.random_range(80.0..150.0) + Vec3::new(0.0, 0.0, 10.0);
            reflectors.push(Reflector::new(anchor, -outward).unwrap());
        }
        let mut scene = Scene::new(tx, rx, rng.random_range(0.0..1e-6), reflectors);
        scene.max_bounce_order = 1;
        scene.los_enabled = rng.random_bool(0.5);
        if scene.validate().is_err() || (tx - rx).norm() < 5.0 {
            continue;
        }
        match enumerate_paths(&scene) {
            Ok(paths) if paths.len() >= 4 => return scene,
            _ => continue,
        }
    }
}
