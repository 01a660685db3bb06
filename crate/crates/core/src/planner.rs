//! Velocity selection over a sampled reachable set.
//!
//! Candidates form a polar grid around the current heading. Each candidate is
//! tested against the kinematic limits, the camera field of view, the chance
//! constraint of every camera detection and the worst-case clearance of every
//! Lidar-only detection. The feasible candidate closest to the preferred
//! velocity wins.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::chance::is_feasible_chance;
use crate::error::{Error, Result};
use crate::geom::{wrap_angle, PinholeCamera, Pose2, Vec2};
use crate::perception::{ObservationSource, ObstacleObservation, PerceptionConfig};

/// Slack on the heading and speed limits so grid samples on the boundary survive
/// a round trip through `atan2`.
const LIMIT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinematicLimits {
    pub v_max: f64,
    pub omega_max: f64,
    pub forward_only: bool,
    pub dt: f64,
}

impl Default for KinematicLimits {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            omega_max: 2.5,
            forward_only: true,
            dt: 0.1,
        }
    }
}

impl KinematicLimits {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_max > 0.0 && self.omega_max > 0.0 && self.dt > 0.0) {
            return Err(Error::Config("v_max, omega_max and dt must be > 0".into()));
        }
        Ok(())
    }

    /// Largest heading change reachable in one step.
    pub fn max_turn(&self) -> f64 {
        self.omega_max * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Confidence parameter; accepted velocities clear each camera detection
    /// with probability at least `k²/(1+k²)` at every checked time.
    pub k: f64,
    pub horizon: f64,
    pub n_tau: usize,
    /// Clearance required from Lidar-only detections, meters.
    pub collision_threshold: f64,
    /// Lookahead for the Lidar-only constraint, seconds. `None` uses `horizon`.
    pub lidar_horizon: Option<f64>,
    pub camera_fov: f64,
    pub enforce_fov: bool,
    pub assumed_ped_speed: f64,
    pub preferred_speed: f64,
    pub grid_speeds: usize,
    pub grid_headings: usize,
    pub robot_radius: f64,
    /// Sigma used by the baseline for every detection. `None` means the largest
    /// sigma of the default perception model over its sensing range.
    pub baseline_sigma: Option<f64>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            k: 1.0,
            horizon: 2.0,
            n_tau: 10,
            collision_threshold: 0.65,
            lidar_horizon: None,
            camera_fov: PinholeCamera::default().fov_horizontal(),
            enforce_fov: true,
            assumed_ped_speed: 1.5,
            preferred_speed: 1.0,
            grid_speeds: 8,
            grid_headings: 21,
            robot_radius: 0.2,
            baseline_sigma: None,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k", self.k),
            ("horizon", self.horizon),
            ("collision_threshold", self.collision_threshold),
            ("lidar_horizon", self.lidar_window()),
            ("preferred_speed", self.preferred_speed),
            ("robot_radius", self.robot_radius),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite value > 0, got {value}")));
            }
        }
        if !(self.camera_fov > 0.0 && self.camera_fov < 2.0 * std::f64::consts::PI) {
            return Err(Error::Config("camera_fov must be in (0, 2π)".into()));
        }
        if !(self.assumed_ped_speed >= 0.0) {
            return Err(Error::Config("assumed_ped_speed must be >= 0".into()));
        }
        if self.n_tau < 1 {
            return Err(Error::Config("n_tau must be >= 1".into()));
        }
        if self.grid_speeds < 2 || self.grid_headings < 2 {
            return Err(Error::Config("grid_speeds and grid_headings must be >= 2".into()));
        }
        if let Some(s) = self.baseline_sigma {
            if !(s >= 0.0) {
                return Err(Error::Config("baseline_sigma must be >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn lidar_window(&self) -> f64 {
        self.lidar_horizon.unwrap_or(self.horizon)
    }

    pub fn effective_baseline_sigma(&self) -> f64 {
        self.baseline_sigma
            .unwrap_or_else(|| PerceptionConfig::default().conservative_sigma())
    }
}

/// `v_robot` is `(lateral, forward)` in the robot frame. The zero velocity is
/// always accepted.
pub fn fov_constraint(v_robot: Vec2, fov: f64) -> bool {
    if v_robot == Vec2::ZERO {
        return true;
    }
    v_robot.x.atan2(v_robot.y).abs() < fov / 2.0
}

/// Clearance from a Lidar-only detection at `p_o` whose direction of motion is
/// unknown: for every checked `τ`, the worst case over all pedestrian headings
/// at `ped_speed` must keep the robot farther than `threshold`.
pub fn lidar_ped_constraint(
    v: Vec2,
    p_o: Vec2,
    ped_speed: f64,
    threshold: f64,
    horizon: f64,
    n_tau: usize,
) -> Result<bool> {
    let distance = p_o.norm();
    if distance <= threshold {
        return Err(Error::AlreadyColliding {
            distance,
            threshold,
        });
    }
    let n = n_tau.max(1);
    Ok((1..=n).all(|j| {
        let tau = horizon * j as f64 / n as f64;
        (v * tau - p_o).norm() - ped_speed * tau > threshold
    }))
}

pub fn kinematic_feasible(v: Vec2, pose: &Pose2, limits: &KinematicLimits) -> bool {
    if v == Vec2::ZERO {
        return true;
    }
    if v.norm() > limits.v_max + LIMIT_SLACK {
        return false;
    }
    if limits.forward_only && v.dot(pose.forward()) < 0.0 {
        return false;
    }
    wrap_angle(v.angle() - pose.heading()).abs() <= limits.max_turn() + LIMIT_SLACK
}

/// Velocity toward `goal` at `preferred_speed`, shortened so one step of `dt`
/// does not overshoot.
pub fn preferred_velocity(pose: &Pose2, goal: Vec2, preferred_speed: f64, dt: f64) -> Vec2 {
    let to_goal = goal - pose.position;
    let d = to_goal.norm();
    if d == 0.0 {
        return Vec2::ZERO;
    }
    to_goal * (preferred_speed.min(d / dt) / d)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    pub linear: f64,
    pub angular: f64,
}

/// Converts a reachable world-frame velocity into unicycle controls.
pub fn to_command(v: Vec2, pose: &Pose2, limits: &KinematicLimits) -> Result<Command> {
    if !kinematic_feasible(v, pose, limits) {
        return Err(Error::ContractViolation(format!(
            "velocity ({}, {}) is not reachable from heading {}",
            v.x,
            v.y,
            pose.heading()
        )));
    }
    if v == Vec2::ZERO {
        return Ok(Command::default());
    }
    let turn = wrap_angle(v.angle() - pose.heading());
    Ok(Command {
        linear: v.norm(),
        angular: (turn / limits.dt).clamp(-limits.omega_max, limits.omega_max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Ok,
    Stuck,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub velocity: Vec2,
    /// Signed heading offset from the current heading, radians.
    pub deviation: f64,
    pub kinematic: bool,
    pub fov: bool,
    pub chance: bool,
    pub lidar: bool,
}

impl Sample {
    pub fn feasible(&self) -> bool {
        self.kinematic && self.fov && self.chance && self.lidar
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    pub samples: Vec<Sample>,
}

impl VelocityGrid {
    /// Polar grid: `grid_speeds` evenly spaced speeds in `[0, v_max]` times
    /// `grid_headings` evenly spaced headings within the turn limit. The zero
    /// speed contributes a single sample.
    pub fn polar(pose: &Pose2, limits: &KinematicLimits, grid_speeds: usize, grid_headings: usize) -> Self {
        let turn = limits.max_turn();
        let mut samples = Vec::with_capacity(1 + (grid_speeds - 1) * grid_headings);
        samples.push(Sample::unchecked(Vec2::ZERO, 0.0));
        for i in 1..grid_speeds {
            let speed = limits.v_max * i as f64 / (grid_speeds - 1) as f64;
            for j in 0..grid_headings {
                let deviation = turn * (2.0 * j as f64 / (grid_headings - 1) as f64 - 1.0);
                let v = Vec2::from_angle(pose.heading() + deviation) * speed;
                samples.push(Sample::unchecked(v, deviation));
            }
        }
        Self { samples }
    }

    pub fn feasible_count(&self) -> usize {
        self.samples.iter().filter(|s| s.feasible()).count()
    }

    /// Feasible sample nearest `target`; ties go to the smaller heading
    /// deviation, then the smaller speed.
    pub fn best(&self, target: Vec2) -> Option<&Sample> {
        self.samples
            .iter()
            .filter(|s| s.feasible())
            .min_by(|a, b| rank(a, target).partial_cmp(&rank(b, target)).unwrap_or(Ordering::Equal))
    }
}

fn rank(s: &Sample, target: Vec2) -> (f64, f64, f64) {
    ((s.velocity - target).norm(), s.deviation.abs(), s.velocity.norm())
}

impl Sample {
    fn unchecked(velocity: Vec2, deviation: f64) -> Self {
        Self {
            velocity,
            deviation,
            kinematic: false,
            fov: false,
            chance: false,
            lidar: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub chosen_velocity: Vec2,
    pub command: Command,
    pub feasible_count: usize,
    pub status: PlanStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Ofvo,
    Baseline { sigma: f64 },
}

/// Marks every grid sample with the per-family constraint verdicts.
pub fn evaluate_grid(
    observations: &[ObstacleObservation],
    pose: &Pose2,
    config: &PlannerConfig,
    limits: &KinematicLimits,
) -> VelocityGrid {
    evaluate(observations, pose, config, limits, Mode::Ofvo)
}

/// Baseline counterpart of [`evaluate_grid`].
pub fn evaluate_grid_baseline(
    observations: &[ObstacleObservation],
    pose: &Pose2,
    config: &PlannerConfig,
    limits: &KinematicLimits,
) -> VelocityGrid {
    let sigma = config.effective_baseline_sigma();
    evaluate(observations, pose, config, limits, Mode::Baseline { sigma })
}

fn evaluate(
    observations: &[ObstacleObservation],
    pose: &Pose2,
    config: &PlannerConfig,
    limits: &KinematicLimits,
    mode: Mode,
) -> VelocityGrid {
    let mut grid = VelocityGrid::polar(pose, limits, config.grid_speeds, config.grid_headings);
    let (camera, lidar): (Vec<&ObstacleObservation>, Vec<_>) = observations
        .iter()
        .partition(|o| o.source == ObservationSource::Camera);

    let chance_set: Vec<ObstacleObservation> = match mode {
        // Stationary Lidar-only returns are static discs; only moving ones get
        // the worst-case pedestrian constraint.
        Mode::Ofvo => camera
            .iter()
            .chain(lidar.iter().filter(|o| o.stationary))
            .map(|o| **o)
            .collect(),
        Mode::Baseline { sigma } => camera
            .iter()
            .map(|o| ObstacleObservation {
                sigma_p: sigma,
                sigma_v: Some(sigma),
                ..**o
            })
            .chain(lidar.iter().map(|o| ObstacleObservation {
                mean_velocity: Some(Vec2::ZERO),
                sigma_p: sigma,
                sigma_v: Some(sigma),
                ..**o
            }))
            .collect(),
    };
    let lidar_set: Vec<&ObstacleObservation> = match mode {
        Mode::Ofvo => lidar.into_iter().filter(|o| !o.stationary).collect(),
        Mode::Baseline { .. } => Vec::new(),
    };

    for s in &mut grid.samples {
        let v = s.velocity;
        s.kinematic = kinematic_feasible(v, pose, limits);
        s.fov = match mode {
            Mode::Ofvo if config.enforce_fov => fov_constraint(pose.to_robot_frame(v), config.camera_fov),
            _ => true,
        };
        s.chance = chance_set.iter().all(|o| {
            is_feasible_chance(o, v, config.robot_radius + o.radius, config.k, config.horizon, config.n_tau)
        });
        s.lidar = lidar_set.iter().all(|o| {
            lidar_ped_constraint(
                v,
                o.mean_position,
                config.assumed_ped_speed,
                config.collision_threshold,
                config.lidar_window(),
                config.n_tau,
            )
            .unwrap_or(false)
        });
    }
    grid
}

fn select(grid: &VelocityGrid, pose: &Pose2, goal: Vec2, config: &PlannerConfig, limits: &KinematicLimits) -> PlanResult {
    let v_pref = preferred_velocity(pose, goal, config.preferred_speed, limits.dt);
    let feasible_count = grid.feasible_count();
    match grid.best(v_pref) {
        Some(s) => PlanResult {
            chosen_velocity: s.velocity,
            command: to_command(s.velocity, pose, limits).expect("grid samples are reachable"),
            feasible_count,
            status: PlanStatus::Ok,
        },
        None => PlanResult {
            chosen_velocity: Vec2::ZERO,
            command: Command::default(),
            feasible_count,
            status: PlanStatus::Stuck,
        },
    }
}

/// Chooses the feasible grid velocity nearest the preferred velocity.
///
/// Observation positions are robot-relative in world axes and velocities are
/// world-frame, so `_robot_velocity` is carried for interface symmetry only.
pub fn plan(
    observations: &[ObstacleObservation],
    pose: &Pose2,
    _robot_velocity: Vec2,
    goal: Vec2,
    config: &PlannerConfig,
    limits: &KinematicLimits,
) -> PlanResult {
    let grid = evaluate_grid(observations, pose, config, limits);
    select(&grid, pose, goal, config, limits)
}

/// Conservative baseline: one fixed sigma for every detection, Lidar-only
/// detections as static discs, no field-of-view constraint.
pub fn plan_prvo_baseline(
    observations: &[ObstacleObservation],
    pose: &Pose2,
    _robot_velocity: Vec2,
    goal: Vec2,
    config: &PlannerConfig,
    limits: &KinematicLimits,
) -> PlanResult {
    let grid = evaluate_grid_baseline(observations, pose, config, limits);
    select(&grid, pose, goal, config, limits)
}
