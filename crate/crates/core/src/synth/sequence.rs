use std::f64::consts::{PI, TAU};

use super::{
    pose_at, scan_scene, unit_f64, BodyPose, Capsule, IdentityProfile, LidarModel, RigidTransform,
    SceneObject,
};
use crate::geometry::{Attribute, DistanceTag, GaitSequence, PointFrame, ViewAngle};
use crate::{seed, Result};

/// Sensor mounting height above the ground, meters.
pub const SENSOR_HEIGHT: f64 = 1.2;
/// Length of one recorded walk, seconds.
pub const WALK_DURATION: f64 = 3.0;

const OCCLUDER_RADIUS: f64 = 0.45;
const OCCLUDER_HEIGHT: f64 = 1.5;

fn offset(p: [f64; 3], d: [f64; 3]) -> [f64; 3] {
    [p[0] + d[0], p[1] + d[1], p[2] + d[2]]
}

/// Carried objects for the attribute, in the body frame.
fn props(attribute: Attribute, pose: &BodyPose) -> Vec<Capsule> {
    match attribute {
        Attribute::Bag => {
            let top = offset(pose.wrist(false), [0.0, -0.05, -0.08]);
            vec![Capsule::new(top, offset(top, [0.0, 0.0, -0.22]), 0.10)]
        }
        Attribute::Carrying => {
            let w = pose.wrist(true);
            vec![Capsule::new(
                offset(w, [-0.12, 0.06, -0.1]),
                offset(w, [0.18, 0.06, -0.1]),
                0.13,
            )]
        }
        Attribute::Umbrella => {
            let (_, top) = pose.extent_z();
            let z = top + 0.25;
            (0..3)
                .map(|k| {
                    let a = k as f64 * PI / 3.0;
                    let (s, c) = a.sin_cos();
                    Capsule::new(
                        [0.1 - 0.5 * c, -0.5 * s, z],
                        [0.1 + 0.5 * c, 0.5 * s, z],
                        0.05,
                    )
                })
                .collect()
        }
        _ => Vec::new(),
    }
}

fn dressed(profile: &IdentityProfile, attribute: Attribute) -> IdentityProfile {
    let scale = match attribute {
        Attribute::Clothing => 1.4,
        Attribute::Uniform => 1.15,
        _ => 1.0,
    };
    IdentityProfile {
        limb_radius: profile.limb_radius * scale,
        ..*profile
    }
}

/// Walking speed implied by the gait parameters, m/s.
fn walking_speed(profile: &IdentityProfile) -> f64 {
    let step = 0.8 * 2.0 * profile.leg_ratio * profile.height * profile.stride_amplitude.sin();
    2.0 * step * profile.stride_freq
}

/// Frames of one straight walk with an explicit starting gait phase.
///
/// The path crosses the sensor's +x axis at the tagged distance halfway
/// through the walk. The heading is `π + view`, so view 0 walks at the sensor.
pub fn walk_frames(
    profile: &IdentityProfile,
    view: ViewAngle,
    distance: DistanceTag,
    attribute: Attribute,
    lidar: &LidarModel,
    phase0: f64,
) -> Vec<PointFrame> {
    let body = dressed(profile, attribute);
    let n = (WALK_DURATION * lidar.frame_rate).round() as usize;
    let heading = PI + (view.degrees() as f64).to_radians();
    let (hs, hc) = heading.sin_cos();
    let speed = walking_speed(profile);
    let cross = distance.meters();

    let occluder = SceneObject::occluder(Capsule::new(
        [0.5 * cross, 0.0, -SENSOR_HEIGHT + OCCLUDER_RADIUS],
        [
            0.5 * cross,
            0.0,
            -SENSOR_HEIGHT + OCCLUDER_HEIGHT - OCCLUDER_RADIUS,
        ],
        OCCLUDER_RADIUS,
    ));

    (0..n)
        .map(|k| {
            let t = k as f64 / lidar.frame_rate;
            let s = (t - 0.5 * WALK_DURATION) * speed;
            let place = RigidTransform {
                yaw: heading,
                translation: [cross + s * hc, s * hs, -SENSOR_HEIGHT],
            };
            let pose = pose_at(&body, phase0 + TAU * profile.stride_freq * t);
            let mut scene: Vec<SceneObject> = pose
                .capsules
                .iter()
                .chain(props(attribute, &pose).iter())
                .map(|c| SceneObject::solid(place.apply_capsule(c)))
                .collect();
            if attribute == Attribute::Occlusion && (n / 3..2 * n / 3).contains(&k) {
                scene.push(occluder);
            }
            scan_scene(&scene, lidar, t)
        })
        .collect()
}

/// One labelled walk. The gait phase is drawn from `seed`, so two
/// attributes generated with the same seed walk in lockstep.
pub fn generate_sequence(
    identity: &str,
    profile: &IdentityProfile,
    view: ViewAngle,
    distance: DistanceTag,
    attribute: Attribute,
    lidar: &LidarModel,
    seed: u64,
) -> Result<GaitSequence> {
    let phase0 = TAU * unit_f64(&mut seed::rng(seed));
    let frames = walk_frames(profile, view, distance, attribute, lidar, phase0);
    GaitSequence::new(frames, identity, view, attribute, distance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::sample_identity;

    fn seq(attr: Attribute, view: u16) -> GaitSequence {
        generate_sequence(
            "id0000",
            &sample_identity(21),
            ViewAngle::new(view).unwrap(),
            DistanceTag::Near,
            attr,
            &LidarModel::default(),
            99,
        )
        .unwrap()
    }

    #[test]
    fn normal_near_walks_have_thirty_nonempty_frames() {
        for view in ViewAngle::all() {
            let s = seq(Attribute::Normal, view.degrees());
            assert_eq!(s.frames.len(), 30);
            assert!(s.frames.iter().all(|f| !f.is_empty()), "view {view}");
        }
    }

    #[test]
    fn night_is_label_only() {
        assert_eq!(
            seq(Attribute::Night, 60).frames,
            seq(Attribute::Normal, 60).frames
        );
    }

    #[test]
    fn occluder_hides_the_middle_third() {
        for view in [0u16, 90, 150, 270] {
            let open = seq(Attribute::Normal, view);
            let hidden = seq(Attribute::Occlusion, view);
            for k in 0..30 {
                let (a, b) = (open.frames[k].len() as f64, hidden.frames[k].len() as f64);
                if (10..20).contains(&k) {
                    assert!(b <= 0.8 * a, "view {view} frame {k}: {b} vs {a}");
                } else {
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn carried_objects_add_points() {
        let base: usize = seq(Attribute::Normal, 90)
            .frames
            .iter()
            .map(|f| f.len())
            .sum();
        for attr in [Attribute::Bag, Attribute::Carrying, Attribute::Clothing] {
            let n: usize = seq(attr, 90).frames.iter().map(|f| f.len()).sum();
            assert!(n > base, "{attr}: {n} vs {base}");
        }
    }

    #[test]
    fn far_walks_are_sparser() {
        let near: usize = seq(Attribute::Normal, 30)
            .frames
            .iter()
            .map(|f| f.len())
            .sum();
        let far = generate_sequence(
            "id0000",
            &sample_identity(21),
            ViewAngle::new(30).unwrap(),
            DistanceTag::Far,
            Attribute::Normal,
            &LidarModel::default(),
            99,
        )
        .unwrap();
        let far: usize = far.frames.iter().map(|f| f.len()).sum();
        assert!(far < near);
    }
}
