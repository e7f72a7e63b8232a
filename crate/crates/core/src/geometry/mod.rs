//! Point frames, labelled sequences and per-frame cleanup.

mod filter;
pub mod io;

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

pub use filter::{crop_roi, denoise, remove_ground, DEFAULT_DENOISE_CELL, DEFAULT_GROUND_LIFT};

/// A LiDAR return in sensor coordinates (meters): x forward, y left, z up.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f32,
    pub y: f32,
    pub z: f32,
}

impl Point3 {
    pub const fn new(x: f32, y: f32, z: f32) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_f64(self) -> [f64; 3] {
        [self.x as f64, self.y as f64, self.z as f64]
    }
}

/// One sweep of the sensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointFrame {
    pub points: Vec<Point3>,
    /// Seconds since the start of the sequence.
    pub timestamp: f64,
}

impl PointFrame {
    pub fn new(points: Vec<Point3>, timestamp: f64) -> Self {
        Self { points, timestamp }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same timestamp, different points.
    pub fn with_points(&self, points: Vec<Point3>) -> Self {
        Self {
            points,
            timestamp: self.timestamp,
        }
    }
}

/// Walking condition of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attribute {
    Normal,
    Bag,
    Clothing,
    Carrying,
    Umbrella,
    Uniform,
    Occlusion,
    Night,
}

impl Attribute {
    /// Report column order.
    pub const ALL: [Attribute; 8] = [
        Attribute::Normal,
        Attribute::Bag,
        Attribute::Clothing,
        Attribute::Carrying,
        Attribute::Umbrella,
        Attribute::Uniform,
        Attribute::Occlusion,
        Attribute::Night,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Normal => "normal",
            Attribute::Bag => "bag",
            Attribute::Clothing => "clothing",
            Attribute::Carrying => "carrying",
            Attribute::Umbrella => "umbrella",
            Attribute::Uniform => "uniform",
            Attribute::Occlusion => "occlusion",
            Attribute::Night => "night",
        }
    }

    /// Capitalized label used in report headers.
    pub fn title(self) -> &'static str {
        match self {
            Attribute::Normal => "Normal",
            Attribute::Bag => "Bag",
            Attribute::Clothing => "Clothing",
            Attribute::Carrying => "Carrying",
            Attribute::Umbrella => "Umbrella",
            Attribute::Uniform => "Uniform",
            Attribute::Occlusion => "Occlusion",
            Attribute::Night => "Night",
        }
    }

    pub fn index(self) -> usize {
        Attribute::ALL.iter().position(|&a| a == self).unwrap()
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Attribute::ALL
            .into_iter()
            .find(|a| a.name() == lower)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown attribute `{s}`")))
    }
}

/// Distance of the walking path from the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DistanceTag {
    Near,
    Far,
}

impl DistanceTag {
    pub fn name(self) -> &'static str {
        match self {
            DistanceTag::Near => "near",
            DistanceTag::Far => "far",
        }
    }

    /// Range at which the path crosses the sensor's line of sight.
    pub fn meters(self) -> f64 {
        match self {
            DistanceTag::Near => 7.0,
            DistanceTag::Far => 12.0,
        }
    }
}

impl fmt::Display for DistanceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "near" => Ok(DistanceTag::Near),
            "far" => Ok(DistanceTag::Far),
            _ => Err(Error::InvalidArgument(format!("unknown distance `{s}`"))),
        }
    }
}

/// Walking direction relative to the sensor, one of twelve 30° steps.
///
/// 0° walks straight at the sensor, 90° crosses from the sensor's left to its
/// right, 180° walks away.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ViewAngle(u16);

impl ViewAngle {
    pub const STEP: u16 = 30;
    pub const COUNT: usize = 12;

    pub fn new(degrees: u16) -> Result<Self> {
        if !degrees.is_multiple_of(Self::STEP) || degrees >= 360 {
            return Err(Error::InvalidArgument(format!(
                "view angle {degrees} is not a multiple of 30 in [0, 360)"
            )));
        }
        Ok(Self(degrees))
    }

    pub fn all() -> Vec<ViewAngle> {
        (0..Self::COUNT as u16)
            .map(|i| Self(i * Self::STEP))
            .collect()
    }

    pub fn degrees(self) -> u16 {
        self.0
    }

    pub fn index(self) -> usize {
        (self.0 / Self::STEP) as usize
    }
}

impl fmt::Display for ViewAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:03}", self.0)
    }
}

/// Ordered frames of one walk plus its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitSequence {
    pub frames: Vec<PointFrame>,
    pub identity: String,
    pub view: ViewAngle,
    pub attribute: Attribute,
    pub distance: DistanceTag,
}

impl GaitSequence {
    pub fn new(
        frames: Vec<PointFrame>,
        identity: impl Into<String>,
        view: ViewAngle,
        attribute: Attribute,
        distance: DistanceTag,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidArgument("sequence has no frames".into()));
        }
        if frames.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
            return Err(Error::InvalidArgument(
                "frame timestamps must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            frames,
            identity: identity.into(),
            view,
            attribute,
            distance,
        })
    }
}

/// Axis-aligned box, closed on every side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region3 {
    pub x: (f32, f32),
    pub y: (f32, f32),
    pub z: (f32, f32),
}

impl Region3 {
    pub fn new(x: (f32, f32), y: (f32, f32), z: (f32, f32)) -> Result<Self> {
        for (axis, (lo, hi)) in [("x", x), ("y", y), ("z", z)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "region {axis} range [{lo}, {hi}] is empty"
                )));
            }
        }
        Ok(Self { x, y, z })
    }

    /// Walkway behind a rear-facing sensor: X [-12, -5], Y [-3, 3], Z [-2, 3].
    pub fn rear_walkway() -> Self {
        Self {
            x: (-12.0, -5.0),
            y: (-3.0, 3.0),
            z: (-2.0, 3.0),
        }
    }

    /// Area covered by the simulator's walking paths (sensor looking along +x).
    pub fn synthetic_walkway() -> Self {
        Self {
            x: (2.0, 16.0),
            y: (-6.0, 6.0),
            z: (-2.0, 2.0),
        }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (self.x.0..=self.x.1).contains(&p.x)
            && (self.y.0..=self.y.1).contains(&p.y)
            && (self.z.0..=self.z.1).contains(&p.z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attribute_names_round_trip() {
        for a in Attribute::ALL {
            assert_eq!(a.name().parse::<Attribute>().unwrap(), a);
        }
        assert!("sneakers".parse::<Attribute>().is_err());
    }

    #[test]
    fn view_angles() {
        assert_eq!(ViewAngle::all().len(), 12);
        assert!(ViewAngle::new(45).is_err());
        assert!(ViewAngle::new(360).is_err());
        assert_eq!(ViewAngle::new(90).unwrap().to_string(), "090");
    }

    #[test]
    fn region_rejects_inverted_axis() {
        assert!(Region3::new((1.0, 0.0), (0.0, 1.0), (0.0, 1.0)).is_err());
        assert!(Region3::new((0.0, 1.0), (0.0, 1.0), (0.0, f32::NAN)).is_err());
    }

    #[test]
    fn sequence_requires_increasing_timestamps() {
        let f = |t| PointFrame::new(vec![], t);
        let v = ViewAngle::new(0).unwrap();
        assert!(GaitSequence::new(vec![], "a", v, Attribute::Normal, DistanceTag::Near).is_err());
        assert!(GaitSequence::new(
            vec![f(0.0), f(0.0)],
            "a",
            v,
            Attribute::Normal,
            DistanceTag::Near
        )
        .is_err());
        assert!(GaitSequence::new(
            vec![f(0.0), f(0.1)],
            "a",
            v,
            Attribute::Normal,
            DistanceTag::Near
        )
        .is_ok());
    }
}
