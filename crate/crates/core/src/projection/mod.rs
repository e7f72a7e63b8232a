//! Depth projections of point frames and their conversion to 64×64 inputs.
//!
//! The range view rasterizes points on the sensor's angular grid
//! (`r = ⌊azimuth/Δθ⌋`, `c = ⌊elevation/Δφ⌋`, value = horizontal range);
//! the right-side and bird's-eye views are orthographic. Each depth image is
//! then min-max normalized to 8 bits, cropped, centred and scaled to 64 rows.

mod image;
mod ortho;
mod range_view;

use std::fmt;
use std::str::FromStr;

use crate::geometry::PointFrame;
use crate::{Error, Result};

pub use image::{
    align_and_resize, decode_dpf, decode_pgm, encode_dpf, encode_pgm, nonzero_depth_range,
    normalize_depth, normalize_depth_in_range, read_pgm, silhouette_from_depth, write_dpf,
    write_pgm, AlignedImage, GrayImage, ALIGNED_SIDE,
};
pub use ortho::project_orthographic;
pub use range_view::{project_range_view, range_view_cell, RangeCell};

/// Stored depth for a cell that is occupied but whose depth evaluates to 0.
pub const OCCUPIED_EPSILON: f32 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProjectionView {
    RangeView,
    RightSideView,
    BirdsEyeView,
}

impl ProjectionView {
    pub fn short_name(self) -> &'static str {
        match self {
            ProjectionView::RangeView => "rv",
            ProjectionView::RightSideView => "rsv",
            ProjectionView::BirdsEyeView => "bev",
        }
    }
}

impl fmt::Display for ProjectionView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ProjectionView {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rv" => Ok(ProjectionView::RangeView),
            "rsv" => Ok(ProjectionView::RightSideView),
            "bev" => Ok(ProjectionView::BirdsEyeView),
            _ => Err(Error::InvalidArgument(format!("unknown view `{s}`"))),
        }
    }
}

/// Parses a comma-separated view list such as `rv,rsv`.
pub fn parse_view_list(s: &str) -> Result<Vec<ProjectionView>> {
    let views = s
        .split(',')
        .map(str::parse)
        .collect::<Result<Vec<ProjectionView>>>()?;
    let mut dedup = views.clone();
    dedup.sort();
    dedup.dedup();
    if views.is_empty() || dedup.len() != views.len() {
        return Err(Error::InvalidArgument(format!("bad view list `{s}`")));
    }
    Ok(views)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    /// Degrees of azimuth per range-view column.
    pub delta_theta: f64,
    /// Degrees of elevation per range-view row.
    pub delta_phi: f64,
    pub view: ProjectionView,
    /// Meters per pixel in the orthographic views.
    pub ortho_cell: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            delta_theta: 0.192,
            delta_phi: 0.2,
            view: ProjectionView::RangeView,
            ortho_cell: 0.02,
        }
    }
}

impl ProjectionConfig {
    pub fn with_view(view: ProjectionView) -> Self {
        Self {
            view,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.delta_theta) && ok(self.delta_phi) && ok(self.ortho_cell) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "projection resolutions must be positive: {self:?}"
            )))
        }
    }
}

/// Float depth raster, row-major. Zero marks an empty cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
    pub view: ProjectionView,
}

impl DepthImage {
    pub fn empty(view: ProjectionView) -> Self {
        Self {
            width: 1,
            height: 1,
            pixels: vec![0.0],
            view,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    pub fn occupied(&self) -> usize {
        self.pixels.iter().filter(|&&d| d > 0.0).count()
    }
}

/// Projects `frame` according to `cfg.view`.
pub fn project(frame: &PointFrame, cfg: &ProjectionConfig) -> Result<DepthImage> {
    match cfg.view {
        ProjectionView::RangeView => project_range_view(frame, cfg),
        _ => project_orthographic(frame, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn view_list_parsing() {
        assert_eq!(
            parse_view_list("rv,rsv").unwrap(),
            vec![ProjectionView::RangeView, ProjectionView::RightSideView]
        );
        assert!(parse_view_list("rv,rv").is_err());
        assert!(parse_view_list("side").is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ProjectionConfig::default().validate().is_ok());
        let bad = ProjectionConfig {
            delta_phi: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
