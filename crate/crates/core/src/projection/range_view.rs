use super::{DepthImage, ProjectionConfig, ProjectionView, OCCUPIED_EPSILON};
use crate::geometry::{Point3, PointFrame};
use crate::{par, Error, Result};

/// Raw angular cell of a point before per-frame translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeCell {
    /// Azimuth index.
    pub r: i64,
    /// Elevation index.
    pub c: i64,
    /// Horizontal range `sqrt(x² + y²)`.
    pub d: f64,
}

/// Angular grid cell of a single point.
pub fn range_view_cell(p: &Point3, delta_theta: f64, delta_phi: f64) -> Result<RangeCell> {
    let [x, y, z] = p.to_f64();
    let range = (x * x + y * y + z * z).sqrt();
    if range == 0.0 {
        return Err(Error::OriginPoint);
    }
    let azimuth = y.atan2(x).to_degrees();
    let elevation = (z / range).asin().to_degrees();
    Ok(RangeCell {
        r: (azimuth / delta_theta).floor() as i64,
        c: (elevation / delta_phi).floor() as i64,
        d: (x * x + y * y).sqrt(),
    })
}

const CHUNK: usize = 4096;

/// Range-view depth image.
///
/// Indices are shifted so the frame's smallest `r` and `c` land at zero;
/// columns follow `r`, rows run from the highest elevation down. Colliding
/// points keep the smallest depth.
pub fn project_range_view(frame: &PointFrame, cfg: &ProjectionConfig) -> Result<DepthImage> {
    cfg.validate()?;
    if frame.points.is_empty() {
        return Ok(DepthImage::empty(ProjectionView::RangeView));
    }

    let chunks: Vec<&[Point3]> = frame.points.chunks(CHUNK).collect();
    let cells = par::map(&chunks, |chunk| {
        chunk
            .iter()
            .map(|p| range_view_cell(p, cfg.delta_theta, cfg.delta_phi))
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .concat();

    let (mut r_min, mut r_max) = (i64::MAX, i64::MIN);
    let (mut c_min, mut c_max) = (i64::MAX, i64::MIN);
    for cell in &cells {
        r_min = r_min.min(cell.r);
        r_max = r_max.max(cell.r);
        c_min = c_min.min(cell.c);
        c_max = c_max.max(cell.c);
    }
    let width = (r_max - r_min + 1) as usize;
    let height = (c_max - c_min + 1) as usize;
    let mut pixels = vec![0.0f32; width * height];
    for cell in &cells {
        let row = (c_max - cell.c) as usize;
        let col = (cell.r - r_min) as usize;
        let d = (cell.d as f32).max(OCCUPIED_EPSILON);
        let slot = &mut pixels[row * width + col];
        if *slot == 0.0 || d < *slot {
            *slot = d;
        }
    }
    Ok(DepthImage {
        width,
        height,
        pixels,
        view: ProjectionView::RangeView,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ProjectionConfig {
        ProjectionConfig::default()
    }

    #[test]
    fn axis_point_maps_to_single_cell() {
        let f = PointFrame::new(vec![Point3::new(1.0, 0.0, 0.0)], 0.0);
        let cell = range_view_cell(&f.points[0], 0.192, 0.2).unwrap();
        assert_eq!((cell.r, cell.c, cell.d), (0, 0, 1.0));
        let img = project_range_view(&f, &cfg()).unwrap();
        assert_eq!(
            (img.width, img.height, img.pixels.clone()),
            (1, 1, vec![1.0])
        );
    }

    #[test]
    fn raw_indices_for_off_axis_point() {
        let cell = range_view_cell(&Point3::new(3.0, 4.0, 1.0), 0.192, 0.2).unwrap();
        assert_eq!((cell.r, cell.c), (276, 56));
        assert_eq!(cell.d, 5.0);
    }

    #[test]
    fn nearest_point_wins_a_collision() {
        let f = PointFrame::new(
            vec![Point3::new(3.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)],
            0.0,
        );
        let img = project_range_view(&f, &cfg()).unwrap();
        assert_eq!(img.pixels, vec![2.0]);
    }

    #[test]
    fn empty_frame_and_origin() {
        let img = project_range_view(&PointFrame::default(), &cfg()).unwrap();
        assert_eq!((img.width, img.height, img.pixels), (1, 1, vec![0.0]));
        let f = PointFrame::new(vec![Point3::new(0.0, 0.0, 0.0)], 0.0);
        assert!(matches!(
            project_range_view(&f, &cfg()),
            Err(Error::OriginPoint)
        ));
    }

    #[test]
    fn higher_elevation_is_nearer_the_top() {
        let f = PointFrame::new(
            vec![Point3::new(5.0, 0.0, 1.0), Point3::new(5.0, 0.0, -1.0)],
            0.0,
        );
        let img = project_range_view(&f, &cfg()).unwrap();
        assert_eq!(img.width, 1);
        assert!(img.get(0, 0) > 0.0 && img.get(img.height - 1, 0) > 0.0);
        assert_eq!(img.occupied(), 2);
    }
}
