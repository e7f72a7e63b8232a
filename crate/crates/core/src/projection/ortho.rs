use super::{DepthImage, ProjectionConfig, ProjectionView, OCCUPIED_EPSILON};
use crate::geometry::PointFrame;
use crate::{Error, Result};

/// Orthographic right-side (x–z plane seen from +y) or bird's-eye (x–y plane
/// seen from +z) depth image.
///
/// Right-side: `row = ⌊(z_max − z)/cell⌋`, `col = ⌊(x − x_min)/cell⌋`, value
/// `y_max − y` of the point nearest the observer. Bird's-eye:
/// `row = ⌊(x_max − x)/cell⌋`, `col = ⌊(y_max − y)/cell⌋`, value `z_max − z` of
/// the highest point.
pub fn project_orthographic(frame: &PointFrame, cfg: &ProjectionConfig) -> Result<DepthImage> {
    cfg.validate()?;
    let view = cfg.view;
    if view == ProjectionView::RangeView {
        return Err(Error::InvalidArgument(
            "range view is not an orthographic projection".into(),
        ));
    }
    if frame.points.is_empty() {
        return Ok(DepthImage::empty(view));
    }

    // (row coordinate decreasing downward, column coordinate, depth coordinate)
    let coords: Vec<[f64; 3]> = frame
        .points
        .iter()
        .map(|p| {
            let [x, y, z] = p.to_f64();
            match view {
                ProjectionView::RightSideView => [z, x, y],
                _ => [x, -y, z],
            }
        })
        .collect();

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for c in &coords {
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let cell = cfg.ortho_cell;
    let height = ((hi[0] - lo[0]) / cell).floor() as usize + 1;
    let width = ((hi[1] - lo[1]) / cell).floor() as usize + 1;
    let mut pixels = vec![0.0f32; width * height];
    for c in &coords {
        let row = ((hi[0] - c[0]) / cell).floor() as usize;
        let col = ((c[1] - lo[1]) / cell).floor() as usize;
        let d = ((hi[2] - c[2]) as f32).max(OCCUPIED_EPSILON);
        let slot = &mut pixels[row * width + col];
        if *slot == 0.0 || d < *slot {
            *slot = d;
        }
    }
    Ok(DepthImage {
        width,
        height,
        pixels,
        view,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;

    fn cfg(view: ProjectionView) -> ProjectionConfig {
        ProjectionConfig::with_view(view)
    }

    #[test]
    fn single_point_is_occupied_epsilon() {
        let f = PointFrame::new(vec![Point3::new(4.0, 1.0, 0.3)], 0.0);
        for v in [ProjectionView::RightSideView, ProjectionView::BirdsEyeView] {
            let img = project_orthographic(&f, &cfg(v)).unwrap();
            assert_eq!((img.width, img.height), (1, 1));
            assert_eq!(img.pixels, vec![OCCUPIED_EPSILON]);
        }
    }

    #[test]
    fn side_view_keeps_point_nearest_the_observer() {
        let f = PointFrame::new(
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)],
            0.0,
        );
        let img = project_orthographic(&f, &cfg(ProjectionView::RightSideView)).unwrap();
        assert_eq!(img.pixels, vec![OCCUPIED_EPSILON]);
    }

    #[test]
    fn side_view_depth_values() {
        // Two columns: x = 0 at depth 0.5, x = 0.1 at depth 0 (nearest).
        let f = PointFrame::new(
            vec![Point3::new(0.0, 0.5, 1.0), Point3::new(0.1, 1.0, 1.0)],
            0.0,
        );
        let img = project_orthographic(&f, &cfg(ProjectionView::RightSideView)).unwrap();
        assert_eq!((img.width, img.height), (6, 1));
        assert_eq!(img.get(0, 0), 0.5);
        assert_eq!(img.get(0, 5), OCCUPIED_EPSILON);
    }

    #[test]
    fn birds_eye_keeps_highest_point() {
        let f = PointFrame::new(
            vec![
                Point3::new(5.0, 0.0, -1.0),
                Point3::new(5.0, 0.0, 0.5),
                Point3::new(5.0, 0.0, 0.2),
            ],
            0.0,
        );
        let img = project_orthographic(&f, &cfg(ProjectionView::BirdsEyeView)).unwrap();
        assert_eq!(img.pixels, vec![OCCUPIED_EPSILON]);
        let f = PointFrame::new(
            vec![Point3::new(5.0, 0.0, -1.0), Point3::new(5.5, 0.0, 0.5)],
            0.0,
        );
        let img = project_orthographic(&f, &cfg(ProjectionView::BirdsEyeView)).unwrap();
        // Forward (larger x) at the top.
        assert_eq!(img.height, 26);
        assert_eq!(img.get(0, 0), OCCUPIED_EPSILON);
        assert_eq!(img.get(25, 0), 1.5);
    }

    #[test]
    fn empty_frame_and_wrong_view() {
        let img = project_orthographic(&PointFrame::default(), &cfg(ProjectionView::BirdsEyeView))
            .unwrap();
        assert_eq!(img.pixels, vec![0.0]);
        assert!(
            project_orthographic(&PointFrame::default(), &cfg(ProjectionView::RangeView)).is_err()
        );
    }
}
