//! Stacked weighted least-squares estimation of position, clock bias and
//! per-path delay fractions.
//!
//! Every LOS or single-bounce path `n` contributes three rows
//!
//! ```text
//! [ I3 | -u_n | -c f_r,n | v_n ] · [p_r; ξ_n; τ_B; τ_ξ,n] = δ_n
//! δ_n = p_t − c τ̂_n f_r,n
//! u_n = c τ̂_n (f_t,n + f_r,n)
//! v_n = c (f_t,n + f_r,n)
//! ```
//!
//! and the unknown vector is laid out as
//! `[p_r (3), ξ_1..ξ_N, τ_B, τ_ξ,1..τ_ξ,N]`.
//!
//! Because `u_n = τ̂_n v_n`, the `ξ_n` and `τ_ξ,n` columns of a path built from
//! real observations are collinear: only `β_n = τ_ξ,n − τ̂_n ξ_n` is
//! determined by the data. The design matrix therefore has at most `N + 4`
//! independent columns, yet position and clock bias are identifiable from
//! two paths. [`solve_wls`] returns the minimum-norm solution and reports both
//! the column rank and whether position and clock bias are pinned down.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{direction_from_angles_rx, direction_from_angles_tx, PathObservation, Vec3, SPEED_OF_LIGHT};

/// Relative singular-value cutoff for rank decisions.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Null-space leakage below which position and clock bias count as determined.
const IDENTIFIABILITY_TOLERANCE: f64 = 1e-8;

/// `‖f_t + f_r‖` below which a path is treated as line-of-sight. Its delay
/// columns are then exactly zero instead of rounding noise that column
/// equilibration would inflate.
pub const LOS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// `w_n = γ_n / Σγ`.
    #[default]
    GainNormalized,
    /// `w_n = 1 / N`: ordinary least squares.
    Uniform,
}

pub fn path_weights(gains: &[f64], mode: WeightMode) -> Result<Vec<f64>> {
    if gains.is_empty() {
        return Err(Error::InsufficientPaths { required: 1, found: 0 });
    }
    if gains.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gains"));
    }
    if let Some(g) = gains.iter().find(|g| **g < 0.0) {
        return Err(Error::InvalidInput(format!("negative gain {g}")));
    }
    match mode {
        WeightMode::Uniform => Ok(vec![1.0 / gains.len() as f64; gains.len()]),
        WeightMode::GainNormalized => {
            let total: f64 = gains.iter().sum();
            if total <= 0.0 {
                return Err(Error::InvalidInput(
                    "all gains are zero; gain-normalized weights undefined".into(),
                ));
            }
            Ok(gains.iter().map(|g| g / total).collect())
        }
    }
}

/// Column indices of the unknown vector for a system with `n` paths.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub paths: usize,
}

impl Layout {
    pub fn unknowns(&self) -> usize {
        2 * self.paths + 4
    }
    pub fn equations(&self) -> usize {
        3 * self.paths
    }
    pub fn xi(&self, n: usize) -> usize {
        3 + n
    }
    pub fn clock_bias(&self) -> usize {
        3 + self.paths
    }
    pub fn tau_xi(&self, n: usize) -> usize {
        4 + self.paths + n
    }
}

/// `U μ = δ` with per-path weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSystem {
    pub design_matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// One normalized weight per path; each applies to that path's three rows.
    pub weights: Vec<f64>,
}

impl StackedSystem {
    /// Validates shapes and normalizes the weights to unit sum.
    pub fn new(design_matrix: DMatrix<f64>, rhs: DVector<f64>, weights: Vec<f64>) -> Result<Self> {
        let layout = Layout { paths: weights.len() };
        if weights.len() < 2 {
            return Err(Error::InsufficientPaths {
                required: 2,
                found: weights.len(),
            });
        }
        if design_matrix.shape() != (layout.equations(), layout.unknowns()) || rhs.len() != layout.equations() {
            return Err(Error::InvalidInput(format!(
                "system shape {:?} / rhs {} does not match {} paths",
                design_matrix.shape(),
                rhs.len(),
                weights.len()
            )));
        }
        Ok(Self {
            design_matrix,
            rhs,
            weights: normalize_weights(&weights)?,
        })
    }

    pub fn layout(&self) -> Layout {
        Layout {
            paths: self.weights.len(),
        }
    }
}

fn normalize_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("weights"));
    }
    if weights.iter().any(|w| *w < 0.0) {
        return Err(Error::InvalidInput("negative weight".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("weights sum to zero".into()));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// Assembles the stacked system for paths departing from `tx`.
pub fn build_system(paths: &[PathObservation], tx: &Vec3, weights: &[f64]) -> Result<StackedSystem> {
    if paths.len() < 2 {
        return Err(Error::InsufficientPaths {
            required: 2,
            found: paths.len(),
        });
    }
    if weights.len() != paths.len() {
        return Err(Error::InvalidInput(format!(
            "{} weights for {} paths",
            weights.len(),
            paths.len()
        )));
    }
    let layout = Layout { paths: paths.len() };
    let mut u = DMatrix::zeros(layout.equations(), layout.unknowns());
    let mut delta = DVector::zeros(layout.equations());
    for (n, path) in paths.iter().enumerate() {
        let f_t = direction_from_angles_tx(&path.aod);
        let f_r = direction_from_angles_rx(&path.aoa);
        let sum = f_t + f_r;
        let v_n = if sum.norm() < LOS_TOLERANCE {
            Vec3::zeros()
        } else {
            SPEED_OF_LIGHT * sum
        };
        let u_n = path.toa * v_n;
        let delta_n = tx - SPEED_OF_LIGHT * path.toa * f_r;
        let row = 3 * n;
        for i in 0..3 {
            u[(row + i, i)] = 1.0;
            u[(row + i, layout.xi(n))] = -u_n[i];
            u[(row + i, layout.clock_bias())] = -SPEED_OF_LIGHT * f_r[i];
            u[(row + i, layout.tau_xi(n))] = v_n[i];
            delta[row + i] = delta_n[i];
        }
    }
    if u.iter().chain(delta.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("stacked system"));
    }
    StackedSystem::new(u, delta, weights.to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateVector {
    pub position: [f64; 3],
    pub xi: Vec<f64>,
    /// Seconds.
    pub clock_bias: f64,
    /// Seconds.
    pub tau_xi: Vec<f64>,
    /// Ratio of extreme singular values of the column-equilibrated weighted
    /// design matrix (infinite when exactly singular).
    pub condition_diagnostic: f64,
    pub rank_deficient: bool,
    /// Numerical column rank.
    pub rank: usize,
    /// Position and clock bias are untouched by the null space.
    pub position_identifiable: bool,
}

impl EstimateVector {
    pub fn position(&self) -> Vec3 {
        Vec3::from(self.position)
    }

    /// Unknown vector in canonical column order.
    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.xi.len();
        let layout = Layout { paths: n };
        let mut mu = DVector::zeros(layout.unknowns());
        mu.rows_mut(0, 3).copy_from_slice(&self.position);
        for k in 0..n {
            mu[layout.xi(k)] = self.xi[k];
            mu[layout.tau_xi(k)] = self.tau_xi[k];
        }
        mu[layout.clock_bias()] = self.clock_bias;
        mu
    }

    /// Delay fractions that also satisfy `τ_ξ,n = τ_B ξ_n`.
    ///
    /// The data fix `β_n = τ_ξ,n − τ̂_n ξ_n`; combining it with the product
    /// relation gives `ξ_n = β_n / (τ_B − τ̂_n)`. Returned as `(ξ_n, τ_ξ,n)`.
    pub fn resolved_delay_fractions(&self, toas: &[f64]) -> Vec<(f64, f64)> {
        self.xi
            .iter()
            .zip(&self.tau_xi)
            .zip(toas)
            .map(|((xi, tau_xi), toa)| {
                let beta = tau_xi - toa * xi;
                let xi = beta / (self.clock_bias - toa);
                (xi, self.clock_bias * xi)
            })
            .collect()
    }
}

/// Minimizes `‖W^{1/2}(Uμ − δ)‖₂` via an SVD of the column-equilibrated,
/// row-weighted design matrix. Rank-deficient systems get the minimum-norm
/// solution.
pub fn solve_wls(system: &StackedSystem) -> Result<EstimateVector> {
    let u = &system.design_matrix;
    let delta = &system.rhs;
    if u.iter().chain(delta.iter()).chain(system.weights.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("stacked system"));
    }
    let layout = system.layout();
    let (m, n) = u.shape();

    let rows = m.max(n);
    let mut a = DMatrix::zeros(rows, n);
    let mut b = DVector::zeros(rows);
    for (p, w) in system.weights.iter().enumerate() {
        let s = w.sqrt();
        for i in 3 * p..3 * p + 3 {
            for j in 0..n {
                a[(i, j)] = s * u[(i, j)];
            }
            b[i] = s * delta[i];
        }
    }

    let scale: Vec<f64> = a
        .column_iter()
        .map(|c| {
            let norm = c.norm();
            if norm > 0.0 {
                1.0 / norm
            } else {
                1.0
            }
        })
        .collect();
    for (j, s) in scale.iter().enumerate() {
        a.column_mut(j).scale_mut(*s);
    }

    let svd = a.svd(true, true);
    let left = svd.u.as_ref().ok_or(Error::NonFinite("svd"))?;
    let right_t = svd.v_t.as_ref().ok_or(Error::NonFinite("svd"))?;
    let sv = &svd.singular_values;
    let sigma_max = sv.max();
    let sigma_min = sv.min();
    if !sigma_max.is_finite() || sigma_max <= 0.0 {
        return Err(Error::NonFinite("design matrix"));
    }
    let cutoff = RANK_TOLERANCE * sigma_max;

    let mut y = DVector::zeros(n);
    let mut null_rows = Vec::new();
    for i in 0..sv.len() {
        let v_i = right_t.row(i).transpose();
        if sv[i] > cutoff {
            let coef = left.column(i).dot(&b) / sv[i];
            y += coef * v_i;
        } else {
            null_rows.push(v_i);
        }
    }
    let rank = n - null_rows.len();

    let pinned = [0, 1, 2, layout.clock_bias()];
    let position_identifiable = null_rows
        .iter()
        .all(|v| pinned.iter().all(|&j| v[j].abs() < IDENTIFIABILITY_TOLERANCE));

    let mut x = DVector::from_iterator(n, y.iter().zip(&scale).map(|(yi, s)| yi * s));
    if !null_rows.is_empty() {
        // project the particular solution off the null space in unscaled coordinates
        let mut basis = DMatrix::zeros(n, null_rows.len());
        for (k, v) in null_rows.iter().enumerate() {
            for j in 0..n {
                basis[(j, k)] = v[j] * scale[j];
            }
            if position_identifiable {
                // leakage below tolerance is rounding noise; keep it out of the projection
                for &j in &pinned {
                    basis[(j, k)] = 0.0;
                }
            }
        }
        let q = basis.qr().q();
        let coeffs = q.transpose() * &x;
        x -= q * coeffs;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("wls solution"));
    }

    let paths = layout.paths;
    Ok(EstimateVector {
        position: [x[0], x[1], x[2]],
        xi: (0..paths).map(|k| x[layout.xi(k)]).collect(),
        clock_bias: x[layout.clock_bias()],
        tau_xi: (0..paths).map(|k| x[layout.tau_xi(k)]).collect(),
        condition_diagnostic: if sigma_min > 0.0 {
            sigma_max / sigma_min
        } else {
            f64::INFINITY
        },
        rank_deficient: rank < n,
        rank,
        position_identifiable,
    })
}

/// Weights, builds and solves in one step.
pub fn estimate_position(paths: &[PathObservation], tx: &Vec3, mode: WeightMode) -> Result<EstimateVector> {
    let gains: Vec<f64> = paths.iter().map(|p| p.gain).collect();
    let weights = path_weights(&gains, mode)?;
    solve_wls(&build_system(paths, tx, &weights)?)
}

/// Weighted residual norm `‖W^{1/2}(Uμ − δ)‖₂`.
pub fn weighted_residual_norm(system: &StackedSystem, mu: &DVector<f64>) -> f64 {
    let r = &system.design_matrix * mu - &system.rhs;
    system
        .weights
        .iter()
        .enumerate()
        .map(|(p, w)| w * r.rows(3 * p, 3).norm_squared())
        .sum::<f64>()
        .sqrt()
}
