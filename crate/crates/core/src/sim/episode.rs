use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{detect_collision, ScenarioSpec, WorldState};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::perception::{observe, PerceptionConfig};
use crate::planner::{evaluate_grid, evaluate_grid_baseline, plan, plan_prvo_baseline, KinematicLimits, PlannerConfig};

/// Stream of the per-episode generator reserved for perception noise.
const PERCEPTION_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Ofvo,
    PrvoBaseline,
}

impl PlannerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ofvo => "ofvo",
            Self::PrvoBaseline => "prvo_baseline",
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ofvo" => Ok(Self::Ofvo),
            "prvo_baseline" | "prvo" | "baseline" => Ok(Self::PrvoBaseline),
            _ => Err(Error::Config(format!("unknown planner {s:?} (expected ofvo or prvo_baseline)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Self::Success => "success",
            Self::Collision => "collision",
            Self::Timeout => "timeout",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "success" => Ok(Self::Success),
            "collision" => Ok(Self::Collision),
            "timeout" => Ok(Self::Timeout),
            _ => Err(Error::invalid(format!("unknown outcome {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub planner: PlannerConfig,
    pub limits: KinematicLimits,
    pub perception: PerceptionConfig,
    /// Arrival radius around the goal, meters.
    pub goal_tolerance: f64,
    /// Also evaluate the other planner on every observation set and record
    /// how their feasible counts compare.
    pub shadow: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            planner: PlannerConfig::default(),
            limits: KinematicLimits::default(),
            perception: PerceptionConfig::default(),
            goal_tolerance: 0.3,
            shadow: false,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        self.limits.validate()?;
        self.perception.validate()?;
        if !(self.goal_tolerance > 0.0) {
            return Err(Error::Config("goal_tolerance must be > 0".into()));
        }
        Ok(())
    }

    /// Baseline sigma tied to this perception model unless set explicitly.
    fn resolved_planner(&self) -> PlannerConfig {
        PlannerConfig {
            baseline_sigma: Some(
                self.planner
                    .baseline_sigma
                    .unwrap_or_else(|| self.perception.conservative_sigma()),
            ),
            ..self.planner
        }
    }
}

/// One simulation step: the state at `time` and the decision taken there.
/// The terminal record carries no decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub chosen_vx: Option<f64>,
    pub chosen_vy: Option<f64>,
    pub feasible_count: Option<usize>,
}

/// Per-step comparison of baseline and OF-VO feasible counts on identical
/// observations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShadowStats {
    pub steps: usize,
    /// Steps where the baseline accepted more candidates than OF-VO.
    pub violations: usize,
    pub max_excess: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    pub trajectory_length: f64,
    pub navigation_time: f64,
    pub trajectory: Vec<TraceRecord>,
    pub seed: u64,
    /// Smallest robot-obstacle clearance over all visited states, meters.
    pub min_clearance: f64,
    pub stuck_steps: usize,
    pub shadow: Option<ShadowStats>,
    /// Position of every pedestrian at each trace record.
    pub pedestrian_paths: Vec<Vec<Vec2>>,
}

/// Runs observe → plan → command → step until arrival, collision or timeout.
///
/// Perception noise comes from a dedicated stream of the seeded generator, so
/// two planners run on the same seed face the same world.
pub fn run_episode(
    spec: &ScenarioSpec,
    world: &WorldState,
    kind: PlannerKind,
    config: &EpisodeConfig,
    seed: u64,
) -> Result<EpisodeResult> {
    config.validate()?;
    let dt = config.limits.dt;
    let planner = config.resolved_planner();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PERCEPTION_STREAM);

    let mut world = world.clone();
    let max_steps = (spec.time_limit / dt + 1e-9).floor() as usize;
    let mut trajectory = Vec::with_capacity(max_steps + 1);
    let mut length = 0.0;
    let mut min_clearance = world.min_clearance();
    let mut stuck_steps = 0;
    let mut shadow = config.shadow.then(ShadowStats::default);
    let mut pedestrian_paths = vec![Vec::with_capacity(max_steps + 1); world.pedestrians.len()];

    let mut step = 0;
    let outcome = loop {
        let pose = world.robot.pose;
        for (path, ped) in pedestrian_paths.iter_mut().zip(&world.pedestrians) {
            path.push(ped.position);
        }
        let record = |chosen: Option<Vec2>, count: Option<usize>| TraceRecord {
            time: step as f64 * dt,
            x: pose.position.x,
            y: pose.position.y,
            heading: pose.heading(),
            chosen_vx: chosen.map(|v| v.x),
            chosen_vy: chosen.map(|v| v.y),
            feasible_count: count,
        };

        let done = if detect_collision(&world) {
            Some(Outcome::Collision)
        } else if pose.position.distance(spec.goal) <= config.goal_tolerance {
            Some(Outcome::Success)
        } else if step >= max_steps {
            Some(Outcome::Timeout)
        } else {
            None
        };
        if let Some(outcome) = done {
            trajectory.push(record(None, None));
            break outcome;
        }

        let observations = observe(&world, &config.perception, &mut rng);
        let velocity = world.robot.velocity;
        let result = match kind {
            PlannerKind::Ofvo => plan(&observations, &pose, velocity, spec.goal, &planner, &config.limits),
            PlannerKind::PrvoBaseline => {
                plan_prvo_baseline(&observations, &pose, velocity, spec.goal, &planner, &config.limits)
            }
        };
        if let Some(stats) = shadow.as_mut() {
            let (ofvo, base) = match kind {
                PlannerKind::Ofvo => (
                    result.feasible_count,
                    evaluate_grid_baseline(&observations, &pose, &planner, &config.limits).feasible_count(),
                ),
                PlannerKind::PrvoBaseline => (
                    evaluate_grid(&observations, &pose, &planner, &config.limits).feasible_count(),
                    result.feasible_count,
                ),
            };
            stats.steps += 1;
            if base > ofvo {
                stats.violations += 1;
                stats.max_excess = stats.max_excess.max(base - ofvo);
            }
        }
        if result.status == crate::planner::PlanStatus::Stuck {
            stuck_steps += 1;
        }
        trajectory.push(record(Some(result.chosen_velocity), Some(result.feasible_count)));

        world.advance(result.command, dt);
        length += world.robot.pose.position.distance(pose.position);
        min_clearance = min_clearance.min(world.min_clearance());
        step += 1;
    };

    Ok(EpisodeResult {
        outcome,
        trajectory_length: length,
        navigation_time: step as f64 * dt,
        trajectory,
        seed,
        min_clearance,
        stuck_steps,
        shadow,
        pedestrian_paths,
    })
}
