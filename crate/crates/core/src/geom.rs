//! Planar and pinhole-camera geometry.
//!
//! Frame conventions, used everywhere in the crate:
//!
//! - **World**: right-handed `(x, y)`, headings measured counter-clockwise from `+x`.
//! - **Robot**: `(lateral, forward)` with lateral positive to the robot's right. A
//!   bearing `θ` is measured from the forward axis towards the right, so a point at
//!   range `l` and bearing `θ` sits at `(l sin θ, l cos θ)`.
//! - **Camera**: `x` right, `y` down, `z` forward (optical axis). The camera is
//!   mounted at the robot centre looking along the forward axis, so camera `x` is
//!   robot lateral and camera `z` is robot forward.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians from `+x`.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction, or zero for a (near) zero vector.
    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 1e-12 {
            self / n
        } else {
            Vec2::ZERO
        }
    }

    /// Rescales to at most `max_len`.
    pub fn clamp_norm(self, max_len: f64) -> Vec2 {
        let n = self.norm();
        if n > max_len && n > 0.0 {
            self * (max_len / n)
        } else {
            self
        }
    }

    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x / rhs, self.y / rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub position: Vec2,
    heading: f64,
}

impl Pose2 {
    pub fn new(position: Vec2, heading: f64) -> Self {
        Self {
            position,
            heading: wrap_angle(heading),
        }
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn set_heading(&mut self, heading: f64) {
        self.heading = wrap_angle(heading);
    }

    pub fn forward(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }

    /// Unit vector pointing to the robot's right.
    pub fn right(&self) -> Vec2 {
        let f = self.forward();
        Vec2::new(f.y, -f.x)
    }

    /// Expresses a world-frame vector as `(lateral, forward)` in the robot frame.
    pub fn to_robot_frame(&self, v: Vec2) -> Vec2 {
        Vec2::new(v.dot(self.right()), v.dot(self.forward()))
    }

    /// Inverse of [`Pose2::to_robot_frame`].
    pub fn to_world_frame(&self, v: Vec2) -> Vec2 {
        self.right() * v.x + self.forward() * v.y
    }

    /// Bearing of a world point relative to the robot's heading, positive to the right.
    pub fn bearing_to(&self, point: Vec2) -> f64 {
        let rel = self.to_robot_frame(point - self.position);
        rel.x.atan2(rel.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscBody {
    pub center: Vec2,
    pub radius: f64,
}

impl DiscBody {
    pub fn new(center: Vec2, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !center.is_finite() {
            return Err(Error::invalid(format!("disc radius must be > 0, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    /// True if the segment `a -> b` passes through the open disc.
    pub fn intersects_segment(&self, a: Vec2, b: Vec2) -> bool {
        let ab = b - a;
        let len_sq = ab.norm_sq();
        let t = if len_sq > 0.0 {
            ((self.center - a).dot(ab) / len_sq).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (a + ab * t).distance(self.center) < self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Planar `(lateral, forward)` components of a camera-frame point.
    pub fn planar(self) -> Vec2 {
        Vec2::new(self.x, self.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

/// Pixel coordinates plus depth along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PixelDepth {
    pub px: f64,
    pub py: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl PinholeCamera {
    /// Camera with the principal point at the image centre.
    pub fn centered(fx: f64, fy: f64, width: u32, height: u32) -> Result<Self> {
        Self::new(fx, fy, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::invalid("focal lengths must be positive"));
        }
        if !(cx > 0.0 && cx < width as f64 && cy > 0.0 && cy < height as f64) {
            return Err(Error::invalid("principal point must lie inside the image"));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn fov_horizontal(&self) -> f64 {
        2.0 * (self.width as f64 / (2.0 * self.fx)).atan()
    }

    pub fn contains_pixel(&self, px: f64, py: f64) -> bool {
        px >= 0.0 && py >= 0.0 && px < self.width as f64 && py < self.height as f64
    }
}

impl Default for PinholeCamera {
    /// 640×480 sensor with `fx = fy = 457` px (a 70° horizontal field of view).
    fn default() -> Self {
        Self {
            fx: 457.0,
            fy: 457.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

pub fn backproject_pixel(cam: &PinholeCamera, px: f64, py: f64, depth: f64) -> Result<Point3> {
    if !(depth > 0.0) {
        return Err(Error::invalid(format!("depth must be positive, got {depth}")));
    }
    Ok(Point3::new(
        (px * depth - cam.cx * depth) / cam.fx,
        (py * depth - cam.cy * depth) / cam.fy,
        depth,
    ))
}

pub fn project_point(cam: &PinholeCamera, p: Point3) -> Result<PixelDepth> {
    if !(p.z > 0.0) {
        return Err(Error::BehindCamera { z: p.z });
    }
    Ok(PixelDepth {
        px: cam.fx * p.x / p.z + cam.cx,
        py: cam.fy * p.y / p.z + cam.cy,
        depth: p.z,
    })
}

/// Maps a pixel in the current frame to its location in the previous frame.
///
/// The result may fall outside the image; callers treat such pixels as missing
/// correspondences (see [`PinholeCamera::contains_pixel`]).
pub fn flow_warp(s1: (f64, f64), flow_at_s1: (f64, f64)) -> (f64, f64) {
    (s1.0 + flow_at_s1.0, s1.1 + flow_at_s1.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    ranges: Vec<f64>,
    angles: Vec<f64>,
    pub fov: f64,
    pub max_range: f64,
}

impl LidarScan {
    pub fn new(ranges: Vec<f64>, angles: Vec<f64>, fov: f64, max_range: f64) -> Result<Self> {
        if ranges.len() != angles.len() {
            return Err(Error::invalid(format!(
                "{} ranges but {} angles",
                ranges.len(),
                angles.len()
            )));
        }
        if let Some(r) = ranges.iter().find(|&&r| !(r > 0.0 && r <= max_range)) {
            return Err(Error::invalid(format!("range {r} outside (0, {max_range}]")));
        }
        if angles.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("scan angles must be strictly increasing"));
        }
        Ok(Self {
            ranges,
            angles,
            fov,
            max_range,
        })
    }

    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Ray-casts a scan of `samples` beams spread evenly over `fov` against discs
    /// given in the robot frame. Beams that hit nothing report `max_range`.
    pub fn cast(discs: &[DiscBody], fov: f64, samples: usize, max_range: f64) -> Result<Self> {
        if samples < 2 {
            return Err(Error::invalid("a scan needs at least two beams"));
        }
        let angles: Vec<f64> = (0..samples)
            .map(|i| -fov / 2.0 + fov * i as f64 / (samples - 1) as f64)
            .collect();
        let ranges = angles
            .iter()
            .map(|&theta| {
                let dir = Vec2::new(theta.sin(), theta.cos());
                discs
                    .iter()
                    .filter_map(|d| ray_disc(dir, d))
                    .fold(max_range, f64::min)
            })
            .collect();
        Self::new(ranges, angles, fov, max_range)
    }
}

/// Nearest positive hit distance of a unit ray from the origin against a disc.
fn ray_disc(dir: Vec2, disc: &DiscBody) -> Option<f64> {
    let b = dir.dot(disc.center);
    let c = disc.center.norm_sq() - disc.radius * disc.radius;
    let disc_term = b * b - c;
    if disc_term < 0.0 {
        return None;
    }
    let root = disc_term.sqrt();
    [b - root, b + root].into_iter().find(|&t| t > 0.0)
}

pub fn lidar_to_points(scan: &LidarScan) -> Vec<Vec2> {
    scan.ranges
        .iter()
        .zip(&scan.angles)
        .map(|(&l, &theta)| Vec2::new(l * theta.sin(), l * theta.cos()))
        .collect()
}
