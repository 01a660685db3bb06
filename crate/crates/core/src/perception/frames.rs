//! Position and velocity estimation from image-space detections.
//!
//! Synthetic frames stand in for the camera: spheres are ray-cast into a depth
//! image with per-pixel object labels, and the optical flow between two frames
//! is computed analytically from the known motion. The estimation steps on top
//! (mask centroid, back-projection, flow warping, finite-difference velocity)
//! are the ones a learned segmentation/flow front end would feed.

use crate::error::{Error, Result};
use crate::geom::{backproject_pixel, flow_warp, project_point, PinholeCamera, PixelDepth, Point3, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    data: Vec<f64>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![f64::INFINITY; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, depth: f64) {
        self.data[y * self.width + x] = depth;
    }

    /// Bilinear sample; falls back to the nearest pixel when a neighbour has no
    /// return. `None` outside the image.
    pub fn sample(&self, px: f64, py: f64) -> Option<f64> {
        if !(px >= 0.0 && py >= 0.0 && px <= (self.width - 1) as f64 && py <= (self.height - 1) as f64) {
            return None;
        }
        let x0 = px.floor() as usize;
        let y0 = py.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let (fx, fy) = (px - x0 as f64, py - y0 as f64);
        let corners = [self.get(x0, y0), self.get(x1, y0), self.get(x0, y1), self.get(x1, y1)];
        if corners.iter().all(|d| d.is_finite()) {
            let top = corners[0] * (1.0 - fx) + corners[1] * fx;
            let bottom = corners[2] * (1.0 - fx) + corners[3] * fx;
            return Some(top * (1.0 - fy) + bottom * fy);
        }
        let d = self.get(px.round() as usize, py.round() as usize);
        d.is_finite().then_some(d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMask {
    pub width: usize,
    pub height: usize,
    bits: Vec<bool>,
}

impl SegmentationMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }
}

/// Mean pixel position and mean depth over the mask's pixels that have a finite depth.
pub fn masked_centroid(mask: &SegmentationMask, depth: &DepthImage) -> Result<PixelDepth> {
    if mask.width != depth.width || mask.height != depth.height {
        return Err(Error::invalid("mask and depth image dimensions differ"));
    }
    let (mut sx, mut sy, mut sd, mut n) = (0.0, 0.0, 0.0, 0usize);
    for (x, y) in mask.pixels() {
        let d = depth.get(x, y);
        if d.is_finite() {
            sx += x as f64;
            sy += y as f64;
            sd += d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoDetection);
    }
    let n = n as f64;
    Ok(PixelDepth {
        px: sx / n,
        py: sy / n,
        depth: sd / n,
    })
}

/// Absolute planar velocity `(lateral, forward)` from two camera-frame positions.
///
/// `robot_velocity` must be in the same `(lateral, forward)` frame.
pub fn estimate_velocity(p1: Point3, p0: Point3, t1: f64, t0: f64, robot_velocity: Vec2) -> Result<Vec2> {
    if !(t1 > t0) {
        return Err(Error::InvalidTimestep { t0, t1 });
    }
    let relative = (p1 - p0).planar() / (t1 - t0);
    Ok(relative + robot_velocity)
}

/// A sphere in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSphere {
    pub center: Point3,
    pub radius: f64,
}

/// A rendered synthetic frame: depth plus the index of the sphere hit at each pixel.
#[derive(Debug, Clone)]
pub struct Frame {
    pub depth: DepthImage,
    labels: Vec<Option<usize>>,
}

impl Frame {
    pub fn label(&self, x: usize, y: usize) -> Option<usize> {
        self.labels[y * self.depth.width + x]
    }

    pub fn mask(&self, label: usize) -> SegmentationMask {
        let mut m = SegmentationMask::new(self.depth.width, self.depth.height);
        for (i, l) in self.labels.iter().enumerate() {
            if *l == Some(label) {
                m.bits[i] = true;
            }
        }
        m
    }
}

pub fn render(cam: &PinholeCamera, spheres: &[SceneSphere]) -> Frame {
    let (w, h) = (cam.width as usize, cam.height as usize);
    let mut depth = DepthImage::new(w, h);
    let mut labels = vec![None; w * h];
    for y in 0..h {
        for x in 0..w {
            let ray = Point3::new((x as f64 - cam.cx) / cam.fx, (y as f64 - cam.cy) / cam.fy, 1.0);
            for (i, s) in spheres.iter().enumerate() {
                if let Some(t) = ray_sphere(ray, s) {
                    if t < depth.get(x, y) {
                        depth.set(x, y, t);
                        labels[y * w + x] = Some(i);
                    }
                }
            }
        }
    }
    Frame { depth, labels }
}

/// Ray parameter of the first hit; with `ray.z == 1` it equals the hit depth.
fn ray_sphere(ray: Point3, s: &SceneSphere) -> Option<f64> {
    let c = s.center;
    let a = ray.x * ray.x + ray.y * ray.y + ray.z * ray.z;
    let b = ray.x * c.x + ray.y * c.y + ray.z * c.z;
    let cc = c.x * c.x + c.y * c.y + c.z * c.z - s.radius * s.radius;
    let disc = b * b - a * cc;
    if disc < 0.0 {
        return None;
    }
    let t = (b - disc.sqrt()) / a;
    (t > 0.0).then_some(t)
}

/// Backward optical flow for a frame whose spheres each moved by
/// `displacements[label]` (camera frame) since the previous frame.
pub fn analytic_flow(cam: &PinholeCamera, frame: &Frame, displacements: &[Point3]) -> Vec<Option<(f64, f64)>> {
    let w = frame.depth.width;
    (0..frame.labels.len())
        .map(|i| {
            let label = frame.labels[i]?;
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            let surface = backproject_pixel(cam, x, y, frame.depth.get(i % w, i / w)).ok()?;
            let prev = surface - displacements[label];
            let s0 = project_point(cam, prev).ok()?;
            Some((s0.px - x, s0.py - y))
        })
        .collect()
}

/// Estimates one object's camera-frame position in the current frame and its
/// planar velocity, by warping its mask into the previous frame with `flow`.
pub fn estimate_object(
    cam: &PinholeCamera,
    current: &Frame,
    previous: &DepthImage,
    flow: &[Option<(f64, f64)>],
    label: usize,
    (t0, t1): (f64, f64),
    robot_velocity: Vec2,
) -> Result<(Point3, Vec2)> {
    let mask = current.mask(label);
    let w = current.depth.width;
    let mut matched = SegmentationMask::new(w, current.depth.height);
    let (mut sx, mut sy, mut sd, mut n) = (0.0, 0.0, 0.0, 0usize);
    for (x, y) in mask.pixels() {
        let Some(f) = flow[y * w + x] else { continue };
        let (x0, y0) = flow_warp((x as f64, y as f64), f);
        if !cam.contains_pixel(x0, y0) {
            continue;
        }
        let Some(d0) = previous.sample(x0, y0) else { continue };
        matched.set(x, y, true);
        sx += x0;
        sy += y0;
        sd += d0;
        n += 1;
    }
    if n == 0 {
        return Err(Error::NoDetection);
    }
    let c1 = masked_centroid(&matched, &current.depth)?;
    let p1 = backproject_pixel(cam, c1.px, c1.py, c1.depth)?;
    let nf = n as f64;
    let p0 = backproject_pixel(cam, sx / nf, sy / nf, sd / nf)?;
    let v = estimate_velocity(p1, p0, t1, t0, robot_velocity)?;
    Ok((p1, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centroid_examples() {
        let mut mask = SegmentationMask::new(20, 20);
        let mut depth = DepthImage::new(20, 20);
        mask.set(10, 10, true);
        mask.set(12, 10, true);
        depth.set(10, 10, 2.0);
        depth.set(12, 10, 4.0);
        let c = masked_centroid(&mask, &depth).unwrap();
        assert_eq!((c.px, c.py, c.depth), (11.0, 10.0, 3.0));

        let mut single = SegmentationMask::new(20, 20);
        single.set(3, 7, true);
        depth.set(3, 7, 1.5);
        let c = masked_centroid(&single, &depth).unwrap();
        assert_eq!((c.px, c.py, c.depth), (3.0, 7.0, 1.5));

        let empty = SegmentationMask::new(20, 20);
        assert!(matches!(masked_centroid(&empty, &depth), Err(Error::NoDetection)));
    }

    #[test]
    fn velocity_examples() {
        let v = estimate_velocity(
            Point3::new(1.0, 0.0, 2.0),
            Point3::new(1.1, 0.0, 2.0),
            0.1,
            0.0,
            Vec2::ZERO,
        )
        .unwrap();
        assert!((v.x + 1.0).abs() < 1e-12 && v.y.abs() < 1e-12);

        let p = Point3::new(0.3, 0.1, 4.0);
        let v = estimate_velocity(p, p, 1.0, 0.5, Vec2::new(0.5, 0.0)).unwrap();
        assert_eq!(v, Vec2::new(0.5, 0.0));

        assert!(matches!(
            estimate_velocity(p, p, 1.0, 1.0, Vec2::ZERO),
            Err(Error::InvalidTimestep { .. })
        ));
    }

    #[test]
    fn point_target_velocity_is_exact() {
        // Pedestrian walking at 1.2 m/s at 30 degrees off the lateral axis.
        let cam = PinholeCamera::default();
        let heading = 30f64.to_radians();
        let vel = Vec2::new(1.2 * heading.cos(), 1.2 * heading.sin());
        let start = Point3::new(-0.8, 0.2, 3.0);
        let (t0, t1) = (0.0, 0.1);
        let at = |t: f64| Point3::new(start.x + vel.x * t, start.y, start.z + vel.y * t);
        let s0 = project_point(&cam, at(t0)).unwrap();
        let s1 = project_point(&cam, at(t1)).unwrap();
        let p0 = backproject_pixel(&cam, s0.px, s0.py, s0.depth).unwrap();
        let p1 = backproject_pixel(&cam, s1.px, s1.py, s1.depth).unwrap();
        let est = estimate_velocity(p1, p0, t1, t0, Vec2::ZERO).unwrap();
        assert!((est - vel).norm() < 1e-9);
        assert!((est.norm() - 1.2).abs() < 1e-6);
    }

    #[test]
    fn rasterized_centroid_depth_within_radius() {
        let cam = PinholeCamera::default();
        for (x, z, r) in [(0.0, 3.0, 0.3), (0.8, 2.0, 0.25), (-1.0, 4.5, 0.4)] {
            let sphere = SceneSphere { center: Point3::new(x, 0.0, z), radius: r };
            let frame = render(&cam, &[sphere]);
            let c = masked_centroid(&frame.mask(0), &frame.depth).unwrap();
            assert!((c.depth - z).abs() < r, "depth {} vs {z}", c.depth);
            let p = backproject_pixel(&cam, c.px, c.py, c.depth).unwrap();
            assert!(p.planar().distance(Vec2::new(x, z)) < r);
        }
    }

    #[test]
    fn occluding_sphere_takes_the_pixel() {
        let cam = PinholeCamera::default();
        let near = SceneSphere { center: Point3::new(0.0, 0.0, 2.0), radius: 0.3 };
        let far = SceneSphere { center: Point3::new(0.0, 0.0, 4.0), radius: 0.3 };
        let frame = render(&cam, &[far, near]);
        assert_eq!(frame.label(320, 240), Some(1));
        assert!((frame.depth.get(320, 240) - 1.7).abs() < 1e-9);
    }

    #[test]
    fn rasterized_pipeline_recovers_velocity() {
        let cam = PinholeCamera::default();
        let vel = Vec2::new(1.2, -0.4);
        let dt = 0.1;
        let c0 = Point3::new(-0.5, 0.0, 3.0);
        let c1 = Point3::new(c0.x + vel.x * dt, 0.0, c0.z + vel.y * dt);
        let f0 = render(&cam, &[SceneSphere { center: c0, radius: 0.3 }]);
        let f1 = render(&cam, &[SceneSphere { center: c1, radius: 0.3 }]);
        let flow = analytic_flow(&cam, &f1, &[c1 - c0]);
        let (p1, est) = estimate_object(&cam, &f1, &f0.depth, &flow, 0, (0.0, dt), Vec2::ZERO).unwrap();
        assert!(p1.planar().distance(c1.planar()) < 0.3);
        assert!((est - vel).norm() < 0.05 * vel.norm(), "estimated {est:?}");
    }

    #[test]
    fn ego_motion_is_compensated() {
        // Static obstacle, robot moving forward at 0.5 m/s: relative motion is
        // purely the robot's, so the absolute estimate should be ~zero.
        let cam = PinholeCamera::default();
        let dt = 0.1;
        let robot_v = Vec2::new(0.0, 0.5);
        let c0 = Point3::new(0.4, 0.0, 3.0);
        let c1 = Point3::new(0.4, 0.0, 3.0 - robot_v.y * dt);
        let f0 = render(&cam, &[SceneSphere { center: c0, radius: 0.3 }]);
        let f1 = render(&cam, &[SceneSphere { center: c1, radius: 0.3 }]);
        let flow = analytic_flow(&cam, &f1, &[c1 - c0]);
        let (_, est) = estimate_object(&cam, &f1, &f0.depth, &flow, 0, (0.0, dt), robot_v).unwrap();
        assert!(est.norm() < 0.03, "{est:?}");
    }
}
