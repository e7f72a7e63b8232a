use std::f64::consts::{FRAC_PI_2, PI};

use super::{Capsule, IdentityProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyPart {
    Torso,
    Head,
    UpperArmLeft,
    UpperArmRight,
    ForearmLeft,
    ForearmRight,
    ThighLeft,
    ThighRight,
    ShinLeft,
    ShinRight,
}

impl BodyPart {
    pub const ALL: [BodyPart; 10] = [
        BodyPart::Torso,
        BodyPart::Head,
        BodyPart::UpperArmLeft,
        BodyPart::UpperArmRight,
        BodyPart::ForearmLeft,
        BodyPart::ForearmRight,
        BodyPart::ThighLeft,
        BodyPart::ThighRight,
        BodyPart::ShinLeft,
        BodyPart::ShinRight,
    ];
}

/// Ten capsules in the body frame: origin on the ground below the pelvis,
/// x along the walking direction, y to the body's left, z up.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyPose {
    pub capsules: [Capsule; 10],
    /// Signed sagittal angles (radians, positive forward) of the left and
    /// right thighs.
    pub thigh_angles: (f64, f64),
    /// Same for the shins.
    pub shin_angles: (f64, f64),
}

impl BodyPose {
    pub fn part(&self, part: BodyPart) -> &Capsule {
        &self.capsules[part as usize]
    }

    /// End of the forearm on the given side.
    pub fn wrist(&self, left: bool) -> [f64; 3] {
        let part = if left {
            BodyPart::ForearmLeft
        } else {
            BodyPart::ForearmRight
        };
        self.part(part).b
    }

    /// Vertical extent from the lowest capsule surface to the highest.
    pub fn extent_z(&self) -> (f64, f64) {
        self.capsules
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                (
                    lo.min(c.a[2].min(c.b[2]) - c.radius),
                    hi.max(c.a[2].max(c.b[2]) + c.radius),
                )
            })
    }
}

/// Direction of a limb hanging down and swung forward by `angle`.
fn limb_dir(angle: f64) -> [f64; 3] {
    [angle.sin(), 0.0, -angle.cos()]
}

fn along(p: [f64; 3], dir: [f64; 3], len: f64) -> [f64; 3] {
    [
        p[0] + len * dir[0],
        p[1] + len * dir[1],
        p[2] + len * dir[2],
    ]
}

/// Sinusoidal walking pose at gait `phase` (radians).
///
/// The left leg runs at `phase`, the right at `phase + π`. Thighs swing by
/// `stride_amplitude·sin`, knees flex by `max(0, −0.7·amplitude·sin(ψ + π/2))`,
/// arms swing against the leg on the same side, and the pelvis bobs by
/// `0.02·height·|sin(phase)|`.
pub fn pose_at(profile: &IdentityProfile, phase: f64) -> BodyPose {
    let h = profile.height;
    let lr = profile.limb_radius;
    let sw = profile.shoulder_width;

    let thigh_r = 1.25 * lr;
    let shin_r = lr;
    let upper_arm_r = 0.8 * lr;
    let forearm_r = 0.7 * lr;
    let torso_r = 0.32 * sw;
    let head_r = 0.065 * h;

    let standing_hip = profile.leg_ratio * h;
    let bounce = 0.02 * h * phase.sin().abs();
    let hip_z = standing_hip + bounce;
    // A straight leg reaches the ground when the pelvis is not bobbing.
    let segment = 0.5 * (standing_hip - shin_r);

    let head_z = bounce + h - head_r;
    let shoulder_z = head_z - head_r - 0.04 * h;
    let upper_arm_len = 0.186 * h;
    let forearm_len = 0.146 * h;
    let hip_half = 0.3 * sw;

    let leg = |side: f64, psi: f64| {
        let thigh = profile.stride_amplitude * psi.sin();
        let flex = (-0.7 * profile.stride_amplitude * (psi + FRAC_PI_2).sin()).max(0.0);
        let hip = [0.0, side * hip_half, hip_z];
        let knee = along(hip, limb_dir(thigh), segment);
        let ankle = along(knee, limb_dir(thigh - flex), segment);
        (
            Capsule::new(hip, knee, thigh_r),
            Capsule::new(knee, ankle, shin_r),
            thigh,
            thigh - flex,
        )
    };
    let arm = |side: f64, psi: f64| {
        let upper = -profile.arm_swing * psi.sin();
        let elbow_flex = 0.15 + 0.5 * upper.max(0.0);
        let shoulder = [0.0, side * 0.5 * sw, shoulder_z];
        let elbow = along(shoulder, limb_dir(upper), upper_arm_len);
        let wrist = along(elbow, limb_dir(upper + elbow_flex), forearm_len);
        (
            Capsule::new(shoulder, elbow, upper_arm_r),
            Capsule::new(elbow, wrist, forearm_r),
        )
    };

    let (psi_l, psi_r) = (phase, phase + PI);
    let (thigh_l, shin_l, ta_l, sa_l) = leg(1.0, psi_l);
    let (thigh_r_cap, shin_r_cap, ta_r, sa_r) = leg(-1.0, psi_r);
    let (upper_l, fore_l) = arm(1.0, psi_l);
    let (upper_r, fore_r) = arm(-1.0, psi_r);

    BodyPose {
        capsules: [
            Capsule::new([0.0, 0.0, hip_z], [0.0, 0.0, shoulder_z], torso_r),
            Capsule::sphere([0.0, 0.0, head_z], head_r),
            upper_l,
            upper_r,
            fore_l,
            fore_r,
            thigh_l,
            thigh_r_cap,
            shin_l,
            shin_r_cap,
        ],
        thigh_angles: (ta_l, ta_r),
        shin_angles: (sa_l, sa_r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::sample_identity;

    #[test]
    fn standing_phase_is_symmetric() {
        let p = pose_at(&sample_identity(4), 0.0);
        let (l, r) = p.thigh_angles;
        assert!((l.abs() - r.abs()).abs() < 1e-12);
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn quarter_phases_swap_legs() {
        let prof = sample_identity(6);
        let a = pose_at(&prof, FRAC_PI_2);
        let b = pose_at(&prof, 3.0 * FRAC_PI_2);
        assert!((a.thigh_angles.0 - b.thigh_angles.1).abs() < 1e-12);
        assert!((a.thigh_angles.1 - b.thigh_angles.0).abs() < 1e-12);
        assert!((a.thigh_angles.0 - prof.stride_amplitude).abs() < 1e-12);
    }

    #[test]
    fn total_height_matches_profile() {
        for seed in 0..50 {
            let prof = sample_identity(seed);
            for phase in [0.0, PI] {
                let (lo, hi) = pose_at(&prof, phase).extent_z();
                let rel = ((hi - lo) - prof.height).abs() / prof.height;
                assert!(rel <= 0.03, "seed {seed} phase {phase}: {}", hi - lo);
            }
        }
    }

    #[test]
    fn connected_capsules_share_joints() {
        let p = pose_at(&sample_identity(3), 0.7);
        assert_eq!(p.part(BodyPart::ThighLeft).b, p.part(BodyPart::ShinLeft).a);
        assert_eq!(
            p.part(BodyPart::UpperArmRight).b,
            p.part(BodyPart::ForearmRight).a
        );
        assert!(p.capsules.iter().all(|c| c.radius > 0.0));
    }
}
