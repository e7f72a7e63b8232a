use std::collections::{HashMap, VecDeque};

use super::{Point3, PointFrame, Region3};

/// Height above the estimated ground below which points are dropped.
pub const DEFAULT_GROUND_LIFT: f32 = 0.15;
/// Voxel edge used for connected-component denoising.
pub const DEFAULT_DENOISE_CELL: f32 = 0.3;

/// Frames smaller than this are left alone by [`remove_ground`].
const MIN_GROUND_POINTS: usize = 20;
const GROUND_PERCENTILE: f64 = 0.05;

/// Keeps the points inside the closed `region`, in their original order.
pub fn crop_roi(frame: &PointFrame, region: &Region3) -> PointFrame {
    frame.with_points(
        frame
            .points
            .iter()
            .copied()
            .filter(|p| region.contains(p))
            .collect(),
    )
}

/// Drops everything lower than `lift` above the 5th percentile of z.
///
/// Frames with fewer than 20 points, or whose whole height range is thinner
/// than `lift`, are returned unchanged.
pub fn remove_ground(frame: &PointFrame, lift: f32) -> PointFrame {
    if frame.points.len() < MIN_GROUND_POINTS {
        return frame.clone();
    }
    let mut zs: Vec<f32> = frame.points.iter().map(|p| p.z).collect();
    zs.sort_by(f32::total_cmp);
    if zs[zs.len() - 1] - zs[0] < lift {
        return frame.clone();
    }
    // nearest-rank percentile
    let rank = (GROUND_PERCENTILE * zs.len() as f64).ceil() as usize;
    let ground = zs[rank.saturating_sub(1)];
    let cut = ground + lift;
    frame.with_points(
        frame
            .points
            .iter()
            .copied()
            .filter(|p| p.z >= cut)
            .collect(),
    )
}

type Voxel = (i32, i32, i32);

fn voxel_of(p: &Point3, cell: f32) -> Voxel {
    (
        (p.x / cell).floor() as i32,
        (p.y / cell).floor() as i32,
        (p.z / cell).floor() as i32,
    )
}

/// Keeps the largest 26-connected cluster of occupied voxels.
///
/// Equal-sized clusters are resolved in favour of the one whose centroid is
/// closest to the sensor.
pub fn denoise(frame: &PointFrame, cell: f32) -> PointFrame {
    if frame.points.is_empty() {
        return frame.clone();
    }
    let mut voxels: HashMap<Voxel, Vec<usize>> = HashMap::new();
    for (i, p) in frame.points.iter().enumerate() {
        voxels.entry(voxel_of(p, cell)).or_default().push(i);
    }

    // Deterministic traversal order.
    let mut keys: Vec<Voxel> = voxels.keys().copied().collect();
    keys.sort_unstable();

    let mut label: HashMap<Voxel, usize> = HashMap::with_capacity(keys.len());
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    for &start in &keys {
        if label.contains_key(&start) {
            continue;
        }
        let id = clusters.len();
        let mut members = Vec::new();
        label.insert(start, id);
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            members.extend_from_slice(&voxels[&v]);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let n = (v.0 + dx, v.1 + dy, v.2 + dz);
                        if voxels.contains_key(&n) && !label.contains_key(&n) {
                            label.insert(n, id);
                            queue.push_back(n);
                        }
                    }
                }
            }
        }
        clusters.push(members);
    }

    let centroid_range = |members: &[usize]| {
        let n = members.len() as f64;
        let (sx, sy, sz) = members.iter().fold((0.0, 0.0, 0.0), |acc, &i| {
            let [x, y, z] = frame.points[i].to_f64();
            (acc.0 + x, acc.1 + y, acc.2 + z)
        });
        ((sx / n).powi(2) + (sy / n).powi(2) + (sz / n).powi(2)).sqrt()
    };

    let best = clusters
        .iter()
        .max_by(|a, b| {
            a.len()
                .cmp(&b.len())
                .then_with(|| centroid_range(b).total_cmp(&centroid_range(a)))
        })
        .expect("nonempty frame has a cluster");

    let mut keep = vec![false; frame.points.len()];
    for &i in best {
        keep[i] = true;
    }
    frame.with_points(
        frame
            .points
            .iter()
            .zip(keep)
            .filter_map(|(p, k)| k.then_some(*p))
            .collect(),
    )
}
