//! Ground-truth world: unicycle robot, pedestrians and static discs.

mod episode;
mod scenario;

pub use episode::{run_episode, EpisodeConfig, EpisodeResult, Outcome, PlannerKind, ShadowStats, TraceRecord};
pub use scenario::{make_scenario, make_scenario_with, ScenarioKind, ScenarioParams, ScenarioSpec};

use serde::{Deserialize, Serialize};

use crate::geom::{DiscBody, Pose2, Vec2};
use crate::planner::Command;

/// Pedestrian speeds never exceed this multiple of their nominal speed.
pub const SPEED_CAP_FACTOR: f64 = 1.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose2,
    pub velocity: Vec2,
    pub radius: f64,
}

impl RobotState {
    pub fn new(pose: Pose2, radius: f64) -> Self {
        Self {
            pose,
            velocity: Vec2::ZERO,
            radius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PedKind {
    Static,
    Straight,
    Crossing,
    SocialForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SocialForceParams {
    /// Repulsion magnitude at zero gap, m/s.
    pub gain: f64,
    /// Decay length of the repulsion, meters.
    pub range: f64,
    pub avoid_robot: bool,
}

impl Default for SocialForceParams {
    fn default() -> Self {
        Self {
            gain: 1.0,
            range: 0.5,
            avoid_robot: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pedestrian {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub kind: PedKind,
    pub goal: Vec2,
    /// Nominal walking speed, m/s.
    pub speed: f64,
}

impl Pedestrian {
    /// Nominal speed is taken from `velocity`.
    pub fn new(position: Vec2, velocity: Vec2, radius: f64, kind: PedKind, goal: Vec2) -> Self {
        let velocity = if kind == PedKind::Static { Vec2::ZERO } else { velocity };
        Self {
            position,
            velocity,
            radius,
            kind,
            goal,
            speed: velocity.norm(),
        }
    }

    pub fn disc(&self) -> DiscBody {
        DiscBody {
            center: self.position,
            radius: self.radius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            min: Vec2::new(-10.0, -10.0),
            max: Vec2::new(10.0, 10.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub disc: DiscBody,
    pub velocity: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub robot: RobotState,
    pub pedestrians: Vec<Pedestrian>,
    pub static_obstacles: Vec<DiscBody>,
    pub time: f64,
    pub bounds: Bounds,
    pub social: SocialForceParams,
}

impl WorldState {
    pub fn new(robot: RobotState, pedestrians: Vec<Pedestrian>, static_obstacles: Vec<DiscBody>) -> Self {
        Self {
            robot,
            pedestrians,
            static_obstacles,
            time: 0.0,
            bounds: Bounds::default(),
            social: SocialForceParams::default(),
        }
    }

    /// Pedestrians first, then static obstacles.
    pub fn obstacle_bodies(&self) -> Vec<Body> {
        self.pedestrians
            .iter()
            .map(|p| Body {
                disc: p.disc(),
                velocity: p.velocity,
            })
            .chain(self.static_obstacles.iter().map(|&disc| Body {
                disc,
                velocity: Vec2::ZERO,
            }))
            .collect()
    }

    /// Smallest `distance − (r_robot + r_obstacle)` over all obstacles.
    pub fn min_clearance(&self) -> f64 {
        let c = self.robot.pose.position;
        self.obstacle_bodies()
            .iter()
            .map(|b| b.disc.center.distance(c) - (self.robot.radius + b.disc.radius))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn advance(&mut self, command: Command, dt: f64) {
        let pose = self.robot.pose;
        let h0 = pose.heading();
        let mid = h0 + 0.5 * command.angular * dt;
        let displacement = Vec2::from_angle(mid) * (command.linear * dt);
        self.robot.pose = Pose2::new(pose.position + displacement, h0 + command.angular * dt);
        self.robot.velocity = displacement / dt;

        let velocities: Vec<Vec2> = (0..self.pedestrians.len())
            .map(|i| {
                let ped = &self.pedestrians[i];
                match ped.kind {
                    PedKind::Static => Vec2::ZERO,
                    PedKind::Straight | PedKind::Crossing => ped.velocity,
                    PedKind::SocialForce => {
                        let robot = self.social.avoid_robot.then_some(&self.robot);
                        social_force_update(ped, self.neighbors(i), robot, &self.social, dt)
                    }
                }
            })
            .collect();
        for (ped, v) in self.pedestrians.iter_mut().zip(velocities) {
            ped.velocity = v;
            ped.position += v * dt;
        }
        self.time += dt;
    }

    fn neighbors(&self, i: usize) -> impl Iterator<Item = &Pedestrian> {
        self.pedestrians
            .iter()
            .enumerate()
            .filter(move |(j, _)| *j != i)
            .map(|(_, p)| p)
    }
}

/// Unicycle integration of the robot with the midpoint heading, pedestrians
/// advanced by their motion models.
pub fn step(world: &WorldState, command: Command, dt: f64) -> WorldState {
    let mut next = world.clone();
    next.advance(command, dt);
    next
}

/// Touching bodies do not collide.
pub fn detect_collision(world: &WorldState) -> bool {
    let c = world.robot.pose.position;
    world
        .obstacle_bodies()
        .iter()
        .any(|b| b.disc.center.distance(c) < world.robot.radius + b.disc.radius)
}

/// Goal attraction at nominal speed plus exponential repulsion from neighbours
/// (and the robot, when given), capped at [`SPEED_CAP_FACTOR`] times nominal.
pub fn social_force_update<'a>(
    ped: &Pedestrian,
    neighbors: impl IntoIterator<Item = &'a Pedestrian>,
    robot: Option<&RobotState>,
    params: &SocialForceParams,
    _dt: f64,
) -> Vec2 {
    let mut v = (ped.goal - ped.position).normalized() * ped.speed;
    let mut push = |center: Vec2, radius: f64| {
        let away = ped.position - center;
        let gap = away.norm() - ped.radius - radius;
        v += away.normalized() * (params.gain * (-gap / params.range).exp());
    };
    for other in neighbors {
        push(other.position, other.radius);
    }
    if let Some(r) = robot {
        push(r.pose.position, r.radius);
    }
    v.clamp_norm(SPEED_CAP_FACTOR * ped.speed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn robot_at(heading: f64) -> RobotState {
        RobotState::new(Pose2::new(Vec2::ZERO, heading), 0.2)
    }

    #[test]
    fn straight_step() {
        let w = WorldState::new(robot_at(0.0), vec![], vec![]);
        let n = step(&w, Command { linear: 1.0, angular: 0.0 }, 1.0);
        assert!((n.robot.pose.position - Vec2::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(n.time, 1.0);
    }

    #[test]
    fn turn_in_place() {
        let w = WorldState::new(robot_at(0.0), vec![], vec![]);
        let n = step(&w, Command { linear: 0.0, angular: FRAC_PI_2 }, 1.0);
        assert_eq!(n.robot.pose.position, Vec2::ZERO);
        assert!((n.robot.pose.heading() - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn semicircle_endpoint() {
        // Constant (1, π) traces a circle of radius 1/π: half of it after 1 s,
        // all of it after 2 s.
        let dt = 1e-3;
        let cmd = Command { linear: 1.0, angular: PI };
        let mut w = WorldState::new(robot_at(0.0), vec![], vec![]);
        for _ in 0..1000 {
            w.advance(cmd, dt);
        }
        assert!((w.robot.pose.position - Vec2::new(0.0, 2.0 / PI)).norm() < 1e-3);
        assert!((w.robot.pose.heading().abs() - PI).abs() < 1e-9);
        for _ in 0..1000 {
            w.advance(cmd, dt);
        }
        assert!(w.robot.pose.position.norm() < 1e-3);
    }

    #[test]
    fn collision_examples() {
        let ped = |x: f64| Pedestrian::new(Vec2::new(x, 0.0), Vec2::ZERO, 0.3, PedKind::Straight, Vec2::ZERO);
        assert!(!detect_collision(&WorldState::new(robot_at(0.0), vec![ped(0.5)], vec![])));
        assert!(detect_collision(&WorldState::new(robot_at(0.0), vec![ped(0.49)], vec![])));
        assert!(!detect_collision(&WorldState::new(robot_at(0.0), vec![], vec![])));
        let wall = DiscBody::new(Vec2::new(0.0, 0.4), 0.25).unwrap();
        assert!(detect_collision(&WorldState::new(robot_at(0.0), vec![], vec![wall])));
    }

    #[test]
    fn isolated_pedestrian_heads_to_goal() {
        let ped = Pedestrian::new(Vec2::ZERO, Vec2::new(0.7, 0.0), 0.3, PedKind::SocialForce, Vec2::new(0.0, 5.0));
        let v = social_force_update(&ped, [], None, &SocialForceParams::default(), 0.1);
        assert!((v - Vec2::new(0.0, 0.7)).norm() < 1e-12);
    }

    #[test]
    fn zero_gain_matches_straight_walk() {
        let params = SocialForceParams { gain: 0.0, ..SocialForceParams::default() };
        let goal = Vec2::new(3.0, 4.0);
        let a = Pedestrian::new(Vec2::ZERO, Vec2::new(0.6, 0.8), 0.3, PedKind::SocialForce, goal * 10.0);
        let b = Pedestrian::new(Vec2::new(0.5, 0.5), Vec2::ZERO, 0.3, PedKind::Straight, Vec2::ZERO);
        let robot = robot_at(0.0);
        let v = social_force_update(&a, [&b], Some(&robot), &params, 0.1);
        assert!((v - Vec2::new(0.6, 0.8)).norm() < 1e-12);
    }

    #[test]
    fn head_on_pedestrians_separate() {
        let a = Pedestrian::new(Vec2::new(-3.0, 0.05), Vec2::new(1.0, 0.0), 0.3, PedKind::SocialForce, Vec2::new(10.0, 0.05));
        let b = Pedestrian::new(Vec2::new(3.0, -0.05), Vec2::new(-1.0, 0.0), 0.3, PedKind::SocialForce, Vec2::new(-10.0, -0.05));
        let far = RobotState::new(Pose2::new(Vec2::new(0.0, 100.0), 0.0), 0.2);
        let mut w = WorldState::new(far, vec![a, b], vec![]);
        let initial = (w.pedestrians[0].position.y - w.pedestrians[1].position.y).abs();
        let mut closest = f64::INFINITY;
        for _ in 0..50 {
            w.advance(Command::default(), 0.1);
            closest = closest.min(w.pedestrians[0].position.distance(w.pedestrians[1].position));
            for p in &w.pedestrians {
                assert!(p.velocity.norm() <= SPEED_CAP_FACTOR * p.speed + 1e-12);
            }
        }
        let lateral = (w.pedestrians[0].position.y - w.pedestrians[1].position.y).abs();
        assert!(lateral > initial + 0.1, "lateral separation {lateral}");
        assert!(closest > 0.6, "closest approach {closest}");
    }

    #[test]
    fn static_pedestrian_never_moves() {
        let p = Pedestrian::new(Vec2::new(1.0, 1.0), Vec2::new(1.0, 0.0), 0.3, PedKind::Static, Vec2::ZERO);
        let mut w = WorldState::new(robot_at(0.0), vec![p], vec![]);
        w.advance(Command::default(), 0.5);
        assert_eq!(w.pedestrians[0].position, Vec2::new(1.0, 1.0));
    }
}
