//! Benchmark scenarios. Every generator draws from its own seeded stream, so a
//! seed fixes the world independently of what the planner later does.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Bounds, PedKind, Pedestrian, RobotState, SocialForceParams, WorldState};
use crate::error::{Error, Result};
use crate::geom::{DiscBody, Pose2, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Empty,
    Static,
    Dynamic,
    Cross,
    Social,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [Self::Empty, Self::Static, Self::Dynamic, Self::Cross, Self::Social];

    pub fn name(self) -> &'static str {
        match self {
            Self::Empty => "empty",
            Self::Static => "static",
            Self::Dynamic => "dynamic",
            Self::Cross => "cross",
            Self::Social => "social",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::Empty => "no obstacles, random start and goal",
            Self::Static => "field of static discs between start and goal",
            Self::Dynamic => "pedestrians walking head-on toward the robot",
            Self::Cross => "pedestrians crossing the path from both sides, outside the camera view",
            Self::Social => "social-force pedestrians that also avoid the robot",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?} (expected one of empty, static, dynamic, cross, social)")))
    }
}

/// Tunable generator ranges. Ranges are `[lo, hi]` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub robot_radius: f64,
    pub ped_radius: f64,
    pub time_limit: f64,
    /// Distance from start to goal in the fixed-layout scenarios.
    pub course_length: f64,
    /// Empty scenario: start coordinates are drawn from `[-half, half]²`.
    pub empty_half_extent: f64,
    pub empty_distance: [f64; 2],
    pub static_count: usize,
    pub static_radius: [f64; 2],
    pub static_half_width: f64,
    /// Static scenario: free gap between neighbouring discs, meters.
    pub static_passage: f64,
    pub dynamic_count: usize,
    pub dynamic_speed: [f64; 2],
    pub dynamic_half_width: f64,
    pub cross_count: usize,
    pub cross_speed: [f64; 2],
    /// Cross scenario: spawn bearings exceed this angle from the start heading.
    pub cross_min_bearing: f64,
    pub social_count: usize,
    pub social_speed: [f64; 2],
    pub social_half_width: f64,
    pub social: SocialForceParams,
    /// Required free gap between spawned bodies, meters.
    pub spawn_gap: f64,
    /// Required free gap between any spawn and the robot start, meters.
    pub start_clearance: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            robot_radius: 0.2,
            ped_radius: 0.3,
            time_limit: 40.0,
            course_length: 10.0,
            empty_half_extent: 4.0,
            empty_distance: [5.0, 10.0],
            static_count: 8,
            static_radius: [0.2, 0.35],
            static_half_width: 3.0,
            // Twice the planner's Lidar-only clearance of 0.65 m.
            static_passage: 1.3,
            dynamic_count: 8,
            dynamic_speed: [0.5, 1.0],
            dynamic_half_width: 2.5,
            cross_count: 8,
            cross_speed: [0.8, 1.3],
            cross_min_bearing: 40f64.to_radians(),
            social_count: 10,
            social_speed: [0.6, 1.1],
            social_half_width: 3.0,
            social: SocialForceParams::default(),
            spawn_gap: 0.2,
            start_clearance: 1.0,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("empty_distance", self.empty_distance),
            ("static_radius", self.static_radius),
            ("dynamic_speed", self.dynamic_speed),
            ("cross_speed", self.cross_speed),
            ("social_speed", self.social_speed),
        ];
        for (name, [lo, hi]) in ranges {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::Config(format!("{name} must satisfy 0 < lo <= hi")));
            }
        }
        let positive = [
            ("robot_radius", self.robot_radius),
            ("ped_radius", self.ped_radius),
            ("time_limit", self.time_limit),
            ("course_length", self.course_length),
            ("empty_half_extent", self.empty_half_extent),
            ("static_half_width", self.static_half_width),
            ("dynamic_half_width", self.dynamic_half_width),
            ("social_half_width", self.social_half_width),
            ("social.range", self.social.range),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0")));
            }
        }
        if !(self.cross_min_bearing > 0.0 && self.cross_min_bearing < FRAC_PI_2) {
            return Err(Error::Config("cross_min_bearing must be in (0, π/2)".into()));
        }
        if !(self.spawn_gap >= 0.0 && self.static_passage >= 0.0 && self.start_clearance >= 0.0 && self.social.gain >= 0.0) {
            return Err(Error::Config("spawn_gap, static_passage, start_clearance and social.gain must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioKind,
    pub start: Pose2,
    pub goal: Vec2,
    pub time_limit: f64,
    pub params: ScenarioParams,
}

pub fn make_scenario(name: &str, seed: u64) -> Result<(ScenarioSpec, WorldState)> {
    make_scenario_with(name.parse()?, &ScenarioParams::default(), seed)
}

pub fn make_scenario_with(kind: ScenarioKind, params: &ScenarioParams, seed: u64) -> Result<(ScenarioSpec, WorldState)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder::new(params);
    let (start, goal) = match kind {
        Scenario::Empty => b.empty(&mut rng),
        Scenario::Static => b.statics(&mut rng)?,
        Scenario::Dynamic => b.dynamic(&mut rng)?,
        Scenario::Cross => b.cross(&mut rng)?,
        Scenario::Social => b.social(&mut rng)?,
    };
    let robot = RobotState::new(start, params.robot_radius);
    let mut world = WorldState::new(robot, b.peds, b.statics);
    world.social = params.social;
    world.bounds = bounds_of(&world, goal);
    let spec = ScenarioSpec {
        name: kind,
        start,
        goal,
        time_limit: params.time_limit,
        params: *params,
    };
    Ok((spec, world))
}

use ScenarioKind as Scenario;

const MAX_ATTEMPTS: usize = 10_000;

struct Builder<'a> {
    params: &'a ScenarioParams,
    start: Vec2,
    peds: Vec<Pedestrian>,
    statics: Vec<DiscBody>,
}

impl<'a> Builder<'a> {
    fn new(params: &'a ScenarioParams) -> Self {
        Self {
            params,
            start: Vec2::ZERO,
            peds: Vec::new(),
            statics: Vec::new(),
        }
    }

    /// Robot at the origin heading +y, goal `course_length` ahead.
    fn course(&mut self) -> (Pose2, Vec2) {
        self.start = Vec2::ZERO;
        (Pose2::new(Vec2::ZERO, FRAC_PI_2), Vec2::new(0.0, self.params.course_length))
    }

    fn free(&self, center: Vec2, radius: f64) -> bool {
        let p = self.params;
        center.distance(self.start) - radius - p.robot_radius >= p.start_clearance
            && self
                .peds
                .iter()
                .map(Pedestrian::disc)
                .chain(self.statics.iter().copied())
                .all(|d| d.center.distance(center) - d.radius - radius >= p.spawn_gap)
    }

    /// Draws candidates until `accept` passes and the disc is free.
    fn place<R: Rng>(
        &self,
        rng: &mut R,
        radius: f64,
        mut draw: impl FnMut(&mut R) -> Vec2,
        accept: impl Fn(Vec2) -> bool,
    ) -> Result<Vec2> {
        for _ in 0..MAX_ATTEMPTS {
            let c = draw(rng);
            if accept(c) && self.free(c, radius) {
                return Ok(c);
            }
        }
        Err(Error::Config(format!(
            "could not place obstacle {} without overlap; lower the count or widen the region",
            self.peds.len() + self.statics.len() + 1
        )))
    }

    fn empty<R: Rng>(&mut self, rng: &mut R) -> (Pose2, Vec2) {
        let p = self.params;
        let h = p.empty_half_extent;
        let start = Vec2::new(rng.random_range(-h..=h), rng.random_range(-h..=h));
        let dist = uniform(rng, p.empty_distance);
        let dir = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let goal = start + Vec2::from_angle(dir) * dist;
        self.start = start;
        (Pose2::new(start, dir), goal)
    }

    fn statics<R: Rng>(&mut self, rng: &mut R) -> Result<(Pose2, Vec2)> {
        let (start, goal) = self.course();
        let p = self.params;
        // Obstacles keep a passage to each other and clear the goal.
        let gap = p.spawn_gap.max(p.static_passage).max(2.0 * p.robot_radius + 0.1);
        for _ in 0..p.static_count {
            let r = uniform(rng, p.static_radius);
            let w = p.static_half_width;
            let len = p.course_length;
            let c = self.place(
                rng,
                r,
                |rng| Vec2::new(rng.random_range(-w..=w), rng.random_range(0.2 * len..=0.8 * len)),
                |c| {
                    c.distance(goal) - r - p.robot_radius >= 0.5
                        && self.statics.iter().all(|d| d.center.distance(c) - d.radius - r >= gap)
                },
            )?;
            self.statics.push(DiscBody::new(c, r)?);
        }
        Ok((start, goal))
    }

    fn dynamic<R: Rng>(&mut self, rng: &mut R) -> Result<(Pose2, Vec2)> {
        let (start, goal) = self.course();
        let p = self.params;
        for _ in 0..p.dynamic_count {
            let w = p.dynamic_half_width;
            let len = p.course_length;
            let c = self.place(
                rng,
                p.ped_radius,
                |rng| Vec2::new(rng.random_range(-w..=w), rng.random_range(0.3 * len..=len)),
                |_| true,
            )?;
            let v = Vec2::new(0.0, -uniform(rng, p.dynamic_speed));
            self.peds
                .push(Pedestrian::new(c, v, p.ped_radius, PedKind::Straight, c + v * 1e3));
        }
        Ok((start, goal))
    }

    /// Pedestrians start to either side and walk across the course, timed to
    /// reach it roughly when the robot does.
    fn cross<R: Rng>(&mut self, rng: &mut R) -> Result<(Pose2, Vec2)> {
        let (start, goal) = self.course();
        let p = self.params;
        let min_ratio = p.cross_min_bearing.tan();
        for i in 0..p.cross_count {
            let side = if i % 2 == 0 { 1.0 } else { -1.0 };
            let speed = uniform(rng, p.cross_speed);
            let len = p.course_length;
            let c = self.place(
                rng,
                p.ped_radius,
                |rng| {
                    let y = rng.random_range(0.15 * len..=0.75 * len);
                    let x = side * speed * y * rng.random_range(0.7..=1.3);
                    Vec2::new(x, y)
                },
                |c| c.x.abs() > min_ratio * c.y,
            )?;
            let v = Vec2::new(-side * speed, 0.0);
            self.peds
                .push(Pedestrian::new(c, v, p.ped_radius, PedKind::Crossing, c + v * 1e3));
        }
        Ok((start, goal))
    }

    fn social<R: Rng>(&mut self, rng: &mut R) -> Result<(Pose2, Vec2)> {
        let (start, goal) = self.course();
        let p = self.params;
        let w = p.social_half_width;
        let len = p.course_length;
        for _ in 0..p.social_count {
            let c = self.place(
                rng,
                p.ped_radius,
                |rng| Vec2::new(rng.random_range(-w..=w), rng.random_range(0.25 * len..=0.9 * len)),
                |_| true,
            )?;
            // Goal on the far side of the course, so every walker crosses it.
            let target = Vec2::new(-c.x.signum() * rng.random_range(0.5 * w..=w), rng.random_range(0.0..=len));
            let speed = uniform(rng, p.social_speed);
            let v = (target - c).normalized() * speed;
            let far = c + (target - c) * 10.0;
            self.peds
                .push(Pedestrian::new(c, v, p.ped_radius, PedKind::SocialForce, far));
        }
        Ok((start, goal))
    }
}

fn uniform<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn bounds_of(world: &WorldState, goal: Vec2) -> Bounds {
    let mut min = world.robot.pose.position;
    let mut max = min;
    let mut grow = |p: Vec2, r: f64| {
        min = Vec2::new(min.x.min(p.x - r), min.y.min(p.y - r));
        max = Vec2::new(max.x.max(p.x + r), max.y.max(p.y + r));
    };
    grow(goal, 0.0);
    for d in &world.static_obstacles {
        grow(d.center, d.radius);
    }
    for ped in &world.pedestrians {
        grow(ped.position, ped.radius);
    }
    let margin = Vec2::new(1.0, 1.0);
    Bounds {
        min: min - margin,
        max: max + margin,
    }
}
