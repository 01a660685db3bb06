//! Distance-dependent Gaussian observation model.
//!
//! The neural perception stack (segmentation + optical flow) is replaced by a
//! sampler that draws each detected obstacle's position and velocity from an
//! isotropic Gaussian centred on the ground truth, with standard deviations that
//! depend on the detection distance. The deterministic estimation pipeline that
//! the networks feed (mask centroid, back-projection, flow warping) lives in
//! [`frames`] and runs on synthetic images.

pub mod frames;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{PinholeCamera, Vec2};
use crate::sim::WorldState;

/// Functional form of a distance-dependent standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SigmaForm {
    /// `σ(d) = value`
    Constant { value: f64 },
    /// `σ(d) = intercept + slope·d`
    Affine { intercept: f64, slope: f64 },
    /// `σ(d) = intercept + scale/d`
    ReciprocalAffine { intercept: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaModel {
    #[serde(flatten)]
    pub form: SigmaForm,
    pub floor: f64,
}

impl SigmaModel {
    pub fn new(form: SigmaForm, floor: f64) -> Result<Self> {
        let model = Self { form, floor };
        model.validate()?;
        Ok(model)
    }

    pub fn constant(value: f64) -> Self {
        Self {
            form: SigmaForm::Constant { value },
            floor: value.max(f64::MIN_POSITIVE),
        }
    }

    pub fn affine(intercept: f64, slope: f64, floor: f64) -> Self {
        Self {
            form: SigmaForm::Affine { intercept, slope },
            floor,
        }
    }

    pub fn reciprocal_affine(intercept: f64, scale: f64, floor: f64) -> Self {
        Self {
            form: SigmaForm::ReciprocalAffine { intercept, scale },
            floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.floor > 0.0) {
            return Err(Error::Config(format!(
                "sigma floor must be > 0, got {}",
                self.floor
            )));
        }
        let finite = match self.form {
            SigmaForm::Constant { value } => value.is_finite(),
            SigmaForm::Affine { intercept, slope } => intercept.is_finite() && slope.is_finite(),
            SigmaForm::ReciprocalAffine { intercept, scale } => {
                intercept.is_finite() && scale.is_finite()
            }
        };
        if !finite {
            return Err(Error::Config("sigma model parameters must be finite".into()));
        }
        Ok(())
    }

    /// Largest value over `[lo, hi]`. Every form is monotone, so an endpoint wins.
    pub fn max_over(&self, lo: f64, hi: f64) -> f64 {
        let at = |d: f64| eval_sigma(self, d).unwrap_or(self.floor);
        at(lo).max(at(hi))
    }
}

pub fn eval_sigma(model: &SigmaModel, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::invalid(format!("distance must be > 0, got {d}")));
    }
    let raw = match model.form {
        SigmaForm::Constant { value } => value,
        SigmaForm::Affine { intercept, slope } => intercept + slope * d,
        SigmaForm::ReciprocalAffine { intercept, scale } => intercept + scale / d,
    };
    Ok(raw.max(model.floor))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationSource {
    Camera,
    LidarOnly,
}

/// One detected obstacle.
///
/// `mean_position` is relative to the robot centre, expressed in world-aligned
/// axes, so it combines directly with world-frame velocities. Camera detections
/// carry a velocity estimate; Lidar-only detections do not. `stationary` marks a
/// Lidar-only return that did not move between the two consecutive scans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleObservation {
    pub mean_position: Vec2,
    pub mean_velocity: Option<Vec2>,
    pub sigma_p: f64,
    pub sigma_v: Option<f64>,
    pub radius: f64,
    pub source: ObservationSource,
    pub distance: f64,
    #[serde(default)]
    pub stationary: bool,
}

impl ObstacleObservation {
    pub fn camera(
        mean_position: Vec2,
        mean_velocity: Vec2,
        sigma_p: f64,
        sigma_v: f64,
        radius: f64,
    ) -> Result<Self> {
        check_obs(sigma_p, radius)?;
        if !(sigma_v >= 0.0) {
            return Err(Error::invalid("sigma_v must be >= 0"));
        }
        Ok(Self {
            mean_position,
            mean_velocity: Some(mean_velocity),
            sigma_p,
            sigma_v: Some(sigma_v),
            radius,
            source: ObservationSource::Camera,
            distance: mean_position.norm(),
            stationary: false,
        })
    }

    pub fn lidar_only(mean_position: Vec2, sigma_p: f64, radius: f64) -> Result<Self> {
        check_obs(sigma_p, radius)?;
        Ok(Self {
            mean_position,
            mean_velocity: None,
            sigma_p,
            sigma_v: None,
            radius,
            source: ObservationSource::LidarOnly,
            distance: mean_position.norm(),
            stationary: false,
        })
    }

    /// Lidar-only detection of an obstacle that held still between scans.
    pub fn lidar_only_stationary(mean_position: Vec2, sigma_p: f64, radius: f64) -> Result<Self> {
        Ok(Self {
            stationary: true,
            ..Self::lidar_only(mean_position, sigma_p, radius)?
        })
    }

    pub fn with_distance(mut self, distance: f64) -> Self {
        self.distance = distance;
        self
    }
}

fn check_obs(sigma_p: f64, radius: f64) -> Result<()> {
    if !(sigma_p >= 0.0) {
        return Err(Error::invalid("sigma_p must be >= 0"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("obstacle radius must be > 0"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionConfig {
    pub camera: PinholeCamera,
    /// Lidar field of view, radians.
    pub lidar_fov: f64,
    pub max_range: f64,
    /// Closest distance considered when bounding sigma models over the sensing range.
    pub min_range: f64,
    pub sigma_p: SigmaModel,
    pub sigma_v: SigmaModel,
    /// Bounding-box enlargement applied to every camera detection.
    pub inflation: f64,
    /// Radius assumed for Lidar-only detections (before inflation).
    pub default_ped_radius: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            camera: PinholeCamera::default(),
            lidar_fov: 240f64.to_radians(),
            max_range: 6.0,
            min_range: 0.2,
            sigma_p: SigmaModel::affine(0.05, 0.01, 1e-3),
            // Flow endpoint error of ~4 px at f = 457 px over a 0.1 s frame gap.
            sigma_v: SigmaModel::affine(0.01, 0.09, 1e-3),
            inflation: 1.5,
            default_ped_radius: 0.3,
        }
    }
}

impl PerceptionConfig {
    pub fn noiseless() -> Self {
        Self {
            sigma_p: SigmaModel::constant(1e-9),
            sigma_v: SigmaModel::constant(1e-9),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sigma_p.validate()?;
        self.sigma_v.validate()?;
        if !(self.lidar_fov > 0.0 && self.lidar_fov <= 2.0 * std::f64::consts::PI) {
            return Err(Error::Config("lidar_fov must be in (0, 2π]".into()));
        }
        if !(self.max_range > self.min_range && self.min_range > 0.0) {
            return Err(Error::Config("need 0 < min_range < max_range".into()));
        }
        if !(self.inflation >= 1.0) {
            return Err(Error::Config("inflation must be >= 1".into()));
        }
        if !(self.default_ped_radius > 0.0) {
            return Err(Error::Config("default_ped_radius must be > 0".into()));
        }
        Ok(())
    }

    /// Largest position or velocity sigma anywhere in the sensing range.
    pub fn conservative_sigma(&self) -> f64 {
        self.sigma_p
            .max_over(self.min_range, self.max_range)
            .max(self.sigma_v.max_over(self.min_range, self.max_range))
    }

    pub fn lidar_only_radius(&self) -> f64 {
        self.default_ped_radius * self.inflation
    }
}

/// Samples one observation per visible obstacle.
///
/// An obstacle is visible when its centre is inside the Lidar field of view and
/// range and no nearer obstacle disc crosses the sight line to its centre.
/// Visible obstacles within the camera's horizontal field of view become camera
/// detections; the rest are Lidar-only, flagged stationary when the body has
/// zero velocity.
pub fn observe<R: Rng + ?Sized>(
    world: &WorldState,
    config: &PerceptionConfig,
    rng: &mut R,
) -> Vec<ObstacleObservation> {
    let pose = world.robot.pose;
    let robot_velocity = world.robot.velocity;
    let half_cam = config.camera.fov_horizontal() / 2.0;
    let half_lidar = config.lidar_fov / 2.0;
    let bodies = world.obstacle_bodies();

    let mut out = Vec::new();
    for (i, body) in bodies.iter().enumerate() {
        let rel = body.disc.center - pose.position;
        let d = rel.norm();
        if d > config.max_range || d <= 0.0 {
            continue;
        }
        let bearing = pose.bearing_to(body.disc.center);
        if bearing.abs() > half_lidar {
            continue;
        }
        let occluded = bodies.iter().enumerate().any(|(j, other)| {
            j != i
                && other.disc.center.distance(pose.position) < d
                && other
                    .disc
                    .intersects_segment(pose.position, body.disc.center)
        });
        if occluded {
            continue;
        }

        let sigma_p = eval_sigma(&config.sigma_p, d).expect("d > 0");
        let position = rel + gaussian2(rng) * sigma_p;
        let obs = if bearing.abs() < half_cam {
            let sigma_v = eval_sigma(&config.sigma_v, d).expect("d > 0");
            let relative = body.velocity - robot_velocity + gaussian2(rng) * sigma_v;
            ObstacleObservation::camera(
                position,
                relative + robot_velocity,
                sigma_p,
                sigma_v,
                inflate_radius(body.disc.radius, config.inflation).expect("validated"),
            )
        } else if body.velocity == Vec2::ZERO {
            ObstacleObservation::lidar_only_stationary(position, sigma_p, config.lidar_only_radius())
        } else {
            ObstacleObservation::lidar_only(position, sigma_p, config.lidar_only_radius())
        };
        out.push(obs.expect("validated").with_distance(d));
    }
    out
}

fn gaussian2<R: Rng + ?Sized>(rng: &mut R) -> Vec2 {
    Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Displacement error (meters) caused by an optical-flow endpoint error of `e_f`
/// pixels for an object at depth `z` seen with focal length `f`.
pub fn flow_displacement_error(e_f: f64, z: f64, f: f64) -> Result<f64> {
    if !(f > 0.0 && z > 0.0) {
        return Err(Error::invalid("focal length and depth must be positive"));
    }
    Ok(e_f * z / f)
}

pub fn inflate_radius(r: f64, factor: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("radius must be > 0, got {r}")));
    }
    if !(factor >= 1.0) {
        return Err(Error::invalid(format!("inflation factor must be >= 1, got {factor}")));
    }
    Ok(r * factor)
}
