use crate::geometry::{Point3, PointFrame};

use super::BodyPose;

type V3 = [f64; 3];

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

/// Segment `a`–`b` swept by a sphere of `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: V3,
    pub b: V3,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: V3, b: V3, radius: f64) -> Self {
        Self { a, b, radius }
    }

    pub fn sphere(center: V3, radius: f64) -> Self {
        Self::new(center, center, radius)
    }

    /// Smallest positive distance along the unit ray `origin + t·dir` at which
    /// it enters the capsule.
    pub fn intersect(&self, origin: V3, dir: V3) -> Option<f64> {
        let ba = sub(self.b, self.a);
        let oa = sub(origin, self.a);
        let baba = dot(ba, ba);
        let r2 = self.radius * self.radius;
        if baba > 1e-18 {
            let bard = dot(ba, dir);
            let baoa = dot(ba, oa);
            let rdoa = dot(dir, oa);
            let oaoa = dot(oa, oa);
            let qa = baba - bard * bard;
            let qb = baba * rdoa - baoa * bard;
            let qc = baba * oaoa - baoa * baoa - r2 * baba;
            let disc = qb * qb - qa * qc;
            if qa.abs() > 1e-18 && disc >= 0.0 {
                let t = (-qb - disc.sqrt()) / qa;
                let y = baoa + t * bard;
                if y > 0.0 && y < baba {
                    return (t > 0.0).then_some(t);
                }
                // Otherwise the hit, if any, is on an end cap.
                let cap = if y <= 0.0 { self.a } else { self.b };
                return sphere_hit(origin, dir, cap, r2);
            }
            // Ray parallel to the axis, or missing the infinite cylinder:
            // only the caps can be hit.
            let ta = sphere_hit(origin, dir, self.a, r2);
            let tb = sphere_hit(origin, dir, self.b, r2);
            return match (ta, tb) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, y) => x.or(y),
            };
        }
        sphere_hit(origin, dir, self.a, r2)
    }

    /// Shortest distance from `p` to the capsule axis segment.
    pub fn axis_distance(&self, p: V3) -> f64 {
        let ba = sub(self.b, self.a);
        let pa = sub(p, self.a);
        let baba = dot(ba, ba);
        let h = if baba > 0.0 {
            (dot(pa, ba) / baba).clamp(0.0, 1.0)
        } else {
            0.0
        };
        norm([pa[0] - h * ba[0], pa[1] - h * ba[1], pa[2] - h * ba[2]])
    }

    fn bounding_sphere(&self) -> (V3, f64) {
        let c = [
            0.5 * (self.a[0] + self.b[0]),
            0.5 * (self.a[1] + self.b[1]),
            0.5 * (self.a[2] + self.b[2]),
        ];
        (c, 0.5 * norm(sub(self.b, self.a)) + self.radius)
    }
}

fn sphere_hit(origin: V3, dir: V3, center: V3, r2: f64) -> Option<f64> {
    let oc = sub(origin, center);
    let b = dot(dir, oc);
    let c = dot(oc, oc) - r2;
    let h = b * b - c;
    if h < 0.0 {
        return None;
    }
    let t = -b - h.sqrt();
    (t > 0.0).then_some(t)
}

/// Maps body-frame coordinates into the sensor frame: rotation about +z by
/// `yaw` radians followed by `translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub yaw: f64,
    pub translation: V3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            yaw: 0.0,
            translation: [0.0; 3],
        }
    }

    pub fn apply(&self, p: V3) -> V3 {
        let (s, c) = self.yaw.sin_cos();
        [
            c * p[0] - s * p[1] + self.translation[0],
            s * p[0] + c * p[1] + self.translation[1],
            p[2] + self.translation[2],
        ]
    }

    pub fn apply_capsule(&self, cap: &Capsule) -> Capsule {
        Capsule::new(self.apply(cap.a), self.apply(cap.b), cap.radius)
    }
}

/// Scene element in sensor coordinates. Non-returning objects block rays
/// without producing points (occluders that annotation would strip).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneObject {
    pub capsule: Capsule,
    pub returns: bool,
}

impl SceneObject {
    pub fn solid(capsule: Capsule) -> Self {
        Self {
            capsule,
            returns: true,
        }
    }

    pub fn occluder(capsule: Capsule) -> Self {
        Self {
            capsule,
            returns: false,
        }
    }
}

/// Spinning LiDAR with a regular angular grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarModel {
    /// Degrees between neighbouring azimuth rays.
    pub delta_theta: f64,
    /// Degrees between neighbouring elevation rays.
    pub delta_phi: f64,
    /// Total horizontal field of view, degrees, centred on +x.
    pub azimuth_fov: f64,
    /// Elevation limits, degrees.
    pub elevation_fov: (f64, f64),
    pub max_range: f64,
    /// Sweeps per second.
    pub frame_rate: f64,
}

impl Default for LidarModel {
    fn default() -> Self {
        Self {
            delta_theta: 0.192,
            delta_phi: 0.2,
            azimuth_fov: 70.0,
            elevation_fov: (-20.0, 20.0),
            max_range: 30.0,
            frame_rate: 10.0,
        }
    }
}

impl LidarModel {
    /// Inclusive azimuth ray index range; ray `i` points at `(i + ½)·Δθ`.
    fn azimuth_indices(&self) -> (i64, i64) {
        let half = 0.5 * self.azimuth_fov;
        (
            (-half / self.delta_theta - 0.5).ceil() as i64,
            (half / self.delta_theta - 0.5).floor() as i64,
        )
    }

    fn elevation_indices(&self) -> (i64, i64) {
        let (lo, hi) = self.elevation_fov;
        (
            (lo / self.delta_phi - 0.5).ceil() as i64,
            (hi / self.delta_phi - 0.5).floor() as i64,
        )
    }

    /// Unit direction of ray `(i, j)`.
    pub fn ray(&self, i: i64, j: i64) -> V3 {
        let az = ((i as f64 + 0.5) * self.delta_theta).to_radians();
        let el = ((j as f64 + 0.5) * self.delta_phi).to_radians();
        let (sa, ca) = az.sin_cos();
        let (se, ce) = el.sin_cos();
        [ce * ca, ce * sa, se]
    }

    pub fn ray_count(&self) -> usize {
        let (a0, a1) = self.azimuth_indices();
        let (e0, e1) = self.elevation_indices();
        ((a1 - a0 + 1) * (e1 - e0 + 1)) as usize
    }

    /// Ray index window that can possibly reach `cap`, clipped to the field
    /// of view. `None` if the capsule is entirely outside it.
    fn window(&self, cap: &Capsule) -> Option<[i64; 4]> {
        let (a0, a1) = self.azimuth_indices();
        let (e0, e1) = self.elevation_indices();
        let (c, r) = cap.bounding_sphere();
        let dist = norm(c);
        if dist <= r {
            return Some([a0, a1, e0, e1]);
        }
        let cone = (r / dist).asin().to_degrees();
        let el = (c[2] / dist).asin().to_degrees();
        let (el_lo, el_hi) = (el - cone, el + cone);
        let (az_lo, az_hi) = if el_hi.abs().max(el_lo.abs()) >= 89.0 {
            (-180.0, 180.0)
        } else {
            let az = c[1].atan2(c[0]).to_degrees();
            let cos_el = el_lo.abs().max(el_hi.abs()).to_radians().cos();
            let spread = (cone.to_radians().sin() / cos_el)
                .min(1.0)
                .asin()
                .to_degrees();
            (az - spread, az + spread)
        };
        let idx = |deg: f64, step: f64| (deg / step - 0.5).floor() as i64;
        let w = [
            (idx(az_lo, self.delta_theta) - 1).max(a0),
            (idx(az_hi, self.delta_theta) + 1).min(a1),
            (idx(el_lo, self.delta_phi) - 1).max(e0),
            (idx(el_hi, self.delta_phi) + 1).min(e1),
        ];
        (w[0] <= w[1] && w[2] <= w[3]).then_some(w)
    }
}

/// Casts every grid ray that can reach the scene and keeps the nearest hit.
pub fn scan_scene(objects: &[SceneObject], lidar: &LidarModel, timestamp: f64) -> PointFrame {
    let windows: Vec<(usize, [i64; 4])> = objects
        .iter()
        .enumerate()
        .filter_map(|(k, o)| lidar.window(&o.capsule).map(|w| (k, w)))
        .collect();
    if windows.is_empty() {
        return PointFrame::new(Vec::new(), timestamp);
    }
    let mut bounds = [i64::MAX, i64::MIN, i64::MAX, i64::MIN];
    for (_, w) in &windows {
        bounds[0] = bounds[0].min(w[0]);
        bounds[1] = bounds[1].max(w[1]);
        bounds[2] = bounds[2].min(w[2]);
        bounds[3] = bounds[3].max(w[3]);
    }

    let origin = [0.0; 3];
    let mut points = Vec::new();
    // Top row first, then left to right in azimuth index.
    for j in (bounds[2]..=bounds[3]).rev() {
        for i in bounds[0]..=bounds[1] {
            let dir = lidar.ray(i, j);
            let mut best: Option<(f64, bool)> = None;
            for (k, w) in &windows {
                if i < w[0] || i > w[1] || j < w[2] || j > w[3] {
                    continue;
                }
                if let Some(t) = objects[*k].capsule.intersect(origin, dir) {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, objects[*k].returns));
                    }
                }
            }
            if let Some((t, true)) = best {
                if t <= lidar.max_range {
                    points.push(Point3::new(
                        (t * dir[0]) as f32,
                        (t * dir[1]) as f32,
                        (t * dir[2]) as f32,
                    ));
                }
            }
        }
    }
    PointFrame::new(points, timestamp)
}

/// Scans a posed body placed in the sensor frame by `body_to_sensor`.
pub fn scan_frame(
    pose: &BodyPose,
    body_to_sensor: &RigidTransform,
    lidar: &LidarModel,
    timestamp: f64,
) -> PointFrame {
    let objects: Vec<SceneObject> = pose
        .capsules
        .iter()
        .map(|c| SceneObject::solid(body_to_sensor.apply_capsule(c)))
        .collect();
    scan_scene(&objects, lidar, timestamp)
}
