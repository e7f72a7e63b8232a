use std::fs;
use std::path::Path;

use super::{DepthImage, ProjectionView};
use crate::{Error, Result};

pub const ALIGNED_SIDE: usize = 64;
const ALIGNED_LEN: usize = ALIGNED_SIDE * ALIGNED_SIDE;

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} image needs {} bytes, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }
}

/// A 64×64 network input. Zero is background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AlignedImage {
    data: Vec<u8>,
}

impl AlignedImage {
    pub fn zeros() -> Self {
        Self {
            data: vec![0; ALIGNED_LEN],
        }
    }

    pub fn from_vec(data: Vec<u8>) -> Result<Self> {
        if data.len() != ALIGNED_LEN {
            return Err(Error::Shape(format!(
                "aligned image needs {ALIGNED_LEN} bytes, got {}",
                data.len()
            )));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * ALIGNED_SIDE + col]
    }

    pub fn is_blank(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: ALIGNED_SIDE,
            height: ALIGNED_SIDE,
            data: self.data.clone(),
        }
    }
}

/// Smallest and largest nonzero depth, if any.
pub fn nonzero_depth_range(img: &DepthImage) -> Option<(f32, f32)> {
    img.pixels
        .iter()
        .copied()
        .filter(|&d| d > 0.0)
        .fold(None, |acc, d| match acc {
            None => Some((d, d)),
            Some((lo, hi)) => Some((lo.min(d), hi.max(d))),
        })
}

/// Per-frame min-max normalization: nearer is brighter, occupied cells map
/// to `[1, 255]`, empty cells stay 0.
pub fn normalize_depth(img: &DepthImage) -> GrayImage {
    match nonzero_depth_range(img) {
        Some(range) => normalize_depth_in_range(img, range),
        None => GrayImage::zeros(img.width, img.height),
    }
}

/// Normalization against an externally supplied depth range, e.g. one
/// gathered over a whole sequence.
pub fn normalize_depth_in_range(img: &DepthImage, (d_min, d_max): (f32, f32)) -> GrayImage {
    let (lo, hi) = (d_min as f64, d_max as f64);
    let data = img
        .pixels
        .iter()
        .map(|&d| {
            if d <= 0.0 {
                0
            } else if hi <= lo {
                255
            } else {
                let t = ((hi - d as f64) / (hi - lo)).clamp(0.0, 1.0);
                1 + (254.0 * t).round() as u8
            }
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Crops to the occupied rows, scales to 64 rows (nearest neighbour) and
/// centres the occupancy centroid column on column 32.
///
/// Source coordinates are computed in integer arithmetic, so translating the
/// input never changes the output.
pub fn align_and_resize(img: &GrayImage) -> AlignedImage {
    let occupied_row = |r: usize| {
        img.data[r * img.width..(r + 1) * img.width]
            .iter()
            .any(|&v| v != 0)
    };
    let Some(top) = (0..img.height).find(|&r| occupied_row(r)) else {
        return AlignedImage::zeros();
    };
    let bottom = (0..img.height).rev().find(|&r| occupied_row(r)).unwrap();
    let h = (bottom - top + 1) as i64;

    // Centroid of column occupancy in pixel-centre coordinates, kept as the
    // fraction numer / (2 * mass).
    let (mut numer, mut mass) = (0i64, 0i64);
    for r in top..=bottom {
        for c in 0..img.width {
            if img.data[r * img.width + c] != 0 {
                numer += 2 * c as i64 + 1;
                mass += 1;
            }
        }
    }

    let side = ALIGNED_SIDE as i64;
    let mut out = vec![0u8; ALIGNED_LEN];
    for (i, out_row) in out.chunks_exact_mut(ALIGNED_SIDE).enumerate() {
        let src_row = top + ((2 * i as i64 + 1) * h / (2 * side)) as usize;
        let row = &img.data[src_row * img.width..(src_row + 1) * img.width];
        for (j, px) in out_row.iter_mut().enumerate() {
            // x = numer / (2 mass) + (j + 1/2 - 32) * h / 64
            let x = side * numer + (2 * j as i64 + 1 - side) * h * mass;
            let src_col = x.div_euclid(2 * side * mass);
            if (0..img.width as i64).contains(&src_col) {
                *px = row[src_col as usize];
            }
        }
    }
    AlignedImage { data: out }
}

/// Binarizes a depth input: occupied pixels become 255.
pub fn silhouette_from_depth(img: &AlignedImage) -> AlignedImage {
    AlignedImage {
        data: img
            .data
            .iter()
            .map(|&v| if v != 0 { 255 } else { 0 })
            .collect(),
    }
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

/// Parses a binary `P5` PGM with maxval 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let bad = |why: &str| Error::format("PGM", why);
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?);
    }
    if fields[0] != "P5" {
        return Err(bad("not a P5 file"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 255 {
        return Err(bad("maxval must be 255"));
    }
    let data = bytes.get(pos + 1..).ok_or_else(|| bad("missing raster"))?;
    if data.len() != width * height {
        return Err(bad("raster size mismatch"));
    }
    GrayImage::new(width, height, data.to_vec())
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    decode_pgm(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub const DPF_MAGIC: &[u8; 4] = b"DPF1";

/// `DPF1`: magic, `u32` width, `u32` height, row-major little-endian `f32`.
pub fn encode_dpf(img: &DepthImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * img.pixels.len());
    out.extend_from_slice(DPF_MAGIC);
    out.extend_from_slice(&(img.width as u32).to_le_bytes());
    out.extend_from_slice(&(img.height as u32).to_le_bytes());
    for d in &img.pixels {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out
}

/// The view is not stored in the file and must be supplied.
pub fn decode_dpf(bytes: &[u8], view: ProjectionView) -> Result<DepthImage> {
    if bytes.len() < 12 || &bytes[..4] != DPF_MAGIC {
        return Err(Error::format("DPF1", "missing magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (width, height) = (word(4), word(8));
    let body = &bytes[12..];
    if body.len() != 4 * width * height {
        return Err(Error::format("DPF1", "raster size mismatch"));
    }
    let pixels: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if pixels.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::format(
            "DPF1",
            "depths must be finite and nonnegative",
        ));
    }
    Ok(DepthImage {
        width,
        height,
        pixels,
        view,
    })
}

pub fn write_dpf(path: &Path, img: &DepthImage) -> Result<()> {
    fs::write(path, encode_dpf(img)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn depth(width: usize, height: usize, pixels: Vec<f32>) -> DepthImage {
        DepthImage {
            width,
            height,
            pixels,
            view: ProjectionView::RangeView,
        }
    }

    #[test]
    fn two_value_min_max() {
        let g = normalize_depth(&depth(3, 1, vec![0.0, 2.0, 4.0]));
        assert_eq!(g.data, vec![0, 255, 1]);
    }

    #[test]
    fn degenerate_range_is_full_bright() {
        let g = normalize_depth(&depth(2, 2, vec![3.0, 0.0, 3.0, 3.0]));
        assert_eq!(g.data, vec![255, 0, 255, 255]);
        assert_eq!(normalize_depth(&depth(1, 1, vec![0.0])).data, vec![0]);
    }

    fn subject(
        width: usize,
        height: usize,
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
    ) -> GrayImage {
        let mut img = GrayImage::zeros(width, height);
        for r in rows {
            for c in cols.clone() {
                img.data[r * width + c] = (1 + (r * 7 + c * 3) % 250) as u8;
            }
        }
        img
    }

    #[test]
    fn centred_full_height_subject_is_a_fixed_point() {
        let img = subject(64, 64, 0..64, 20..44);
        let aligned = align_and_resize(&img);
        assert_eq!(aligned.data(), &img.data[..]);
    }

    #[test]
    fn half_height_subject_is_doubled() {
        let img = subject(64, 64, 10..42, 28..36);
        let aligned = align_and_resize(&img);
        for i in 0..64 {
            for j in 0..64 {
                // height 32 -> every source row twice; width doubles about the centroid (col 32)
                let src_r = 10 + i / 2;
                let src_c = 32 + (j as i64 - 32).div_euclid(2);
                assert_eq!(
                    aligned.get(i, j),
                    img.get(src_r, src_c as usize),
                    "({i},{j})"
                );
            }
        }
    }

    #[test]
    fn blank_image_aligns_to_blank() {
        assert!(align_and_resize(&GrayImage::zeros(10, 7)).is_blank());
    }

    #[test]
    fn silhouette_binarizes() {
        let mut v = vec![0u8; 4096];
        v[1] = 37;
        v[2] = 255;
        let s = silhouette_from_depth(&AlignedImage::from_vec(v).unwrap());
        assert_eq!(&s.data()[..3], &[0, 255, 255]);
        assert_eq!(silhouette_from_depth(&s), s);
        assert!(silhouette_from_depth(&AlignedImage::zeros()).is_blank());
    }

    #[test]
    fn pgm_is_bit_exact() {
        let img = GrayImage::new(2, 2, vec![0, 1, 128, 255]).unwrap();
        let bytes = encode_pgm(&img);
        assert_eq!(&bytes[..], b"P5\n2 2\n255\n\x00\x01\x80\xff");
        assert_eq!(decode_pgm(&bytes).unwrap(), img);
        assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
    }

    #[test]
    fn dpf_layout() {
        let img = depth(2, 1, vec![1.5, 0.0]);
        let bytes = encode_dpf(&img);
        assert_eq!(&bytes[..12], b"DPF1\x02\0\0\0\x01\0\0\0");
        assert_eq!(decode_dpf(&bytes, ProjectionView::RangeView).unwrap(), img);
    }

    proptest! {
        #[test]
        fn normalized_support(pixels in prop::collection::vec(prop_oneof![Just(0.0f32), 0.5f32..30.0], 1..200)) {
            let n = pixels.len();
            let g = normalize_depth(&depth(n, 1, pixels.clone()));
            for (d, v) in pixels.iter().zip(&g.data) {
                prop_assert_eq!(*d == 0.0, *v == 0);
            }
        }

        #[test]
        fn normalization_ignores_depth_offset(
            ticks in prop::collection::vec(0u32..4096, 1..100),
            offset in 1u32..64,
        ) {
            // Depths on a 1/256 grid keep the shifted arithmetic exact.
            let a: Vec<f32> = ticks.iter().map(|&t| if t == 0 { 0.0 } else { t as f32 / 256.0 }).collect();
            let b: Vec<f32> = a.iter().map(|&d| if d == 0.0 { 0.0 } else { d + offset as f32 }).collect();
            let n = a.len();
            prop_assert_eq!(normalize_depth(&depth(n, 1, a)), normalize_depth(&depth(n, 1, b)));
        }

        #[test]
        fn alignment_ignores_translation(
            w in 4usize..30, h in 4usize..60, seed in 0u64..1000, dr in 0usize..5, dc in 0usize..7,
        ) {
            use rand::Rng as _;
            let mut rng = crate::seed::rng(seed);
            let mut base = GrayImage::zeros(80, 80);
            let mut moved = GrayImage::zeros(80, 80);
            for r in 0..h {
                for c in 0..w {
                    if rng.gen_bool(0.6) {
                        let v = rng.gen_range(1..=255);
                        base.data[(r + 2) * 80 + c + 10] = v;
                        moved.data[(r + 2 + dr) * 80 + c + 10 + dc] = v;
                    }
                }
            }
            prop_assert_eq!(align_and_resize(&base), align_and_resize(&moved));
        }
    }
}
