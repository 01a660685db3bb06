//! Chance-constrained velocity obstacles.
//!
//! For an obstacle observed at mean position `p` with mean velocity `u`, a
//! robot velocity `v` and a lookahead time `t`, the relative offset
//! `d_rel = p − (v − u)·t` is Gaussian with mean `p + u·t − v·t` and isotropic
//! variance `s² = σ_p² + σ_v²·t²`. The clearance variable
//!
//! ```text
//! f = ‖d_rel‖² − (r_robot + r_obstacle)²
//! ```
//!
//! is a scaled noncentral χ² with two degrees of freedom shifted by `−r_sum²`.
//! Its exact first two moments are
//!
//! ```text
//! μ_f = ‖μ_rel‖² + 2s² − r_sum²
//! σ_f = sqrt(4s²‖μ_rel‖² + 4s⁴)
//! ```
//!
//! A velocity is accepted for an obstacle when `μ_f − k·σ_f > 0` at every
//! checked lookahead time. By Cantelli's inequality this bounds the probability
//! of `f > 0` from below by `k²/(1+k²)` at each of those times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::perception::ObstacleObservation;

/// Strict-inequality guard for `μ_f − k·σ_f > 0`.
pub const FEASIBILITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeDistribution {
    pub mean: Vec2,
    /// Isotropic per-axis variance, m².
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChanceStats {
    pub mean: f64,
    pub std_dev: f64,
}

impl ChanceStats {
    pub fn margin(&self, k: f64) -> f64 {
        self.mean - k * self.std_dev
    }
}

pub fn relative_stats(obs: &ObstacleObservation, v: Vec2, t: f64) -> Result<RelativeDistribution> {
    if !(t > 0.0) {
        return Err(Error::InvalidHorizon(t));
    }
    Ok(relative_at(obs, v, t))
}

/// Same as [`relative_stats`] but also defined at `t = 0` (the current offset).
fn relative_at(obs: &ObstacleObservation, v: Vec2, t: f64) -> RelativeDistribution {
    let u = obs.mean_velocity.unwrap_or(Vec2::ZERO);
    let sv = obs.sigma_v.unwrap_or(0.0);
    RelativeDistribution {
        mean: obs.mean_position + u * t - v * t,
        variance: obs.sigma_p * obs.sigma_p + sv * sv * t * t,
    }
}

/// Exact mean and standard deviation of `‖d_rel‖² − r_sum²`.
pub fn moments(rel: &RelativeDistribution, r_sum: f64) -> ChanceStats {
    let m2 = rel.mean.norm_sq();
    let s2 = rel.variance;
    ChanceStats {
        mean: m2 + 2.0 * s2 - r_sum * r_sum,
        std_dev: 2.0 * s2.sqrt() * (m2 + s2).sqrt(),
    }
}

pub fn f_stats(obs: &ObstacleObservation, v: Vec2, t: f64, r_sum: f64) -> Result<ChanceStats> {
    if !(r_sum > 0.0) {
        return Err(Error::invalid(format!("r_sum must be > 0, got {r_sum}")));
    }
    let rel = relative_stats(obs, v, t)?;
    Ok(moments(&rel, r_sum))
}

/// Lower bound `k²/(1+k²)` on `P(f > 0)` when `μ_f − k·σ_f > 0`.
pub fn cantelli_bound(k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::invalid(format!("k must be > 0, got {k}")));
    }
    let k2 = k * k;
    Ok(k2 / (1.0 + k2))
}

/// Time in `[0, horizon]` at which `‖p_rel − v_rel·t‖` is smallest.
pub fn closest_approach_time(p_rel: Vec2, v_rel: Vec2, horizon: f64) -> f64 {
    let vv = v_rel.norm_sq();
    if vv <= 0.0 {
        return 0.0;
    }
    (p_rel.dot(v_rel) / vv).clamp(0.0, horizon)
}

/// Lookahead times checked for one obstacle: the uniform grid `T·j/n_tau`
/// (`j = 1..=n_tau`) plus the closest-approach time of the mean relative motion.
pub fn check_times(obs: &ObstacleObservation, v: Vec2, horizon: f64, n_tau: usize) -> impl Iterator<Item = f64> {
    let u = obs.mean_velocity.unwrap_or(Vec2::ZERO);
    let star = closest_approach_time(obs.mean_position, v - u, horizon);
    let n = n_tau.max(1);
    (1..=n)
        .map(move |j| horizon * j as f64 / n as f64)
        .chain(std::iter::once(star))
}

/// Smallest `μ_f − k·σ_f` over [`check_times`].
pub fn min_margin(obs: &ObstacleObservation, v: Vec2, r_sum: f64, k: f64, horizon: f64, n_tau: usize) -> f64 {
    check_times(obs, v, horizon, n_tau)
        .map(|tau| moments(&relative_at(obs, v, tau), r_sum).margin(k))
        .fold(f64::INFINITY, f64::min)
}

/// True iff `μ_f(τ) − k·σ_f(τ) > 0` at every checked lookahead time.
pub fn is_feasible_chance(
    obs: &ObstacleObservation,
    v: Vec2,
    r_sum: f64,
    k: f64,
    horizon: f64,
    n_tau: usize,
) -> bool {
    check_times(obs, v, horizon, n_tau)
        .all(|tau| moments(&relative_at(obs, v, tau), r_sum).margin(k) > FEASIBILITY_EPS)
}

/// Deterministic velocity-obstacle membership: does the relative motion bring
/// the two discs into overlap within `(0, horizon]`?
pub fn deterministic_vo_contains(p_rel: Vec2, v_rel: Vec2, r_sum: f64, horizon: f64) -> bool {
    let t = closest_approach_time(p_rel, v_rel, horizon);
    (p_rel - v_rel * t).norm() < r_sum
}
