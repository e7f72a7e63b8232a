//! `PCF1` point frame files and the on-disk sequence layout.
//!
//! A frame file is little-endian: the magic `PCF1`, a `u32` point count and
//! then `count` triples of `f32` (x, y, z). Sequences live at
//! `<root>/<identity>/<attribute>-<seq#>/<view>/<frame#>.pcf`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{Attribute, Point3, PointFrame};
use crate::{Error, Result};

pub const PCF_MAGIC: &[u8; 4] = b"PCF1";
pub const FRAME_EXTENSION: &str = "pcf";

pub fn encode_frame(frame: &PointFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 12 * frame.points.len());
    out.extend_from_slice(PCF_MAGIC);
    out.extend_from_slice(&(frame.points.len() as u32).to_le_bytes());
    for p in &frame.points {
        out.extend_from_slice(&p.x.to_le_bytes());
        out.extend_from_slice(&p.y.to_le_bytes());
        out.extend_from_slice(&p.z.to_le_bytes());
    }
    out
}

/// Decodes a `PCF1` buffer. The timestamp is not stored in the file.
pub fn decode_frame(bytes: &[u8], timestamp: f64) -> Result<PointFrame> {
    if bytes.len() < 8 || &bytes[..4] != PCF_MAGIC {
        return Err(Error::format("PCF1", "missing magic"));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if body.len() != count * 12 {
        return Err(Error::format(
            "PCF1",
            format!(
                "expected {} payload bytes, found {}",
                count * 12,
                body.len()
            ),
        ));
    }
    let f = |b: &[u8]| f32::from_le_bytes(b.try_into().unwrap());
    let points: Vec<Point3> = body
        .chunks_exact(12)
        .map(|c| Point3::new(f(&c[0..4]), f(&c[4..8]), f(&c[8..12])))
        .collect();
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::format("PCF1", "non-finite coordinate"));
    }
    Ok(PointFrame::new(points, timestamp))
}

pub fn write_frame(path: &Path, frame: &PointFrame) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&encode_frame(frame))
        .map_err(|e| Error::io(path, e))
}

pub fn read_frame(path: &Path, timestamp: f64) -> Result<PointFrame> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_frame(&bytes, timestamp)
}

/// Directory holding the frames of one sequence.
pub fn sequence_dir(
    root: &Path,
    identity: &str,
    attribute: Attribute,
    seq: u32,
    view_degrees: u16,
) -> PathBuf {
    root.join(identity)
        .join(format!("{}-{:02}", attribute.name(), seq))
        .join(format!("{view_degrees:03}"))
}

pub fn frame_file_name(index: usize) -> String {
    format!("{index:03}.{FRAME_EXTENSION}")
}

pub fn write_sequence_frames(dir: &Path, frames: &[PointFrame]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in frames.iter().enumerate() {
        write_frame(&dir.join(frame_file_name(i)), frame)?;
    }
    Ok(())
}

/// Reads every `*.pcf` in `dir` in file-name order. Timestamps are
/// reconstructed as `index / frame_rate`.
pub fn read_sequence_frames(dir: &Path, frame_rate: f64) -> Result<Vec<PointFrame>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == FRAME_EXTENSION))
        .collect();
    files.sort();
    files
        .iter()
        .enumerate()
        .map(|(i, p)| read_frame(p, i as f64 / frame_rate))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_matches_convention() {
        let p = sequence_dir(Path::new("/d"), "id0003", Attribute::Bag, 1, 30);
        assert_eq!(p, PathBuf::from("/d/id0003/bag-01/030"));
        assert_eq!(frame_file_name(7), "007.pcf");
    }

    #[test]
    fn header_layout_is_exact() {
        let f = PointFrame::new(vec![Point3::new(1.0, -2.0, 0.5)], 0.0);
        let b = encode_frame(&f);
        assert_eq!(&b[..4], b"PCF1");
        assert_eq!(&b[4..8], &[1, 0, 0, 0]);
        assert_eq!(&b[8..12], &1.0f32.to_le_bytes());
        assert_eq!(b.len(), 20);
    }

    #[test]
    fn rejects_truncated_payload() {
        let mut b = encode_frame(&PointFrame::new(vec![Point3::new(1.0, 2.0, 3.0)], 0.0));
        b.pop();
        assert!(decode_frame(&b, 0.0).is_err());
        assert!(decode_frame(b"PCF", 0.0).is_err());
        assert!(decode_frame(b"XXXX\0\0\0\0", 0.0).is_err());
    }

    #[test]
    fn sequence_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let seq_dir = sequence_dir(dir.path(), "id0000", Attribute::Normal, 0, 0);
        let frames: Vec<PointFrame> = (0..3)
            .map(|i| PointFrame::new(vec![Point3::new(i as f32, 0.0, 1.0)], i as f64 / 10.0))
            .collect();
        write_sequence_frames(&seq_dir, &frames).unwrap();
        assert_eq!(read_sequence_frames(&seq_dir, 10.0).unwrap(), frames);
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(pts in prop::collection::vec((-50.0f32..50.0, -50.0f32..50.0, -50.0f32..50.0), 0..64)) {
            let f = PointFrame::new(pts.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect(), 0.3);
            prop_assert_eq!(decode_frame(&encode_frame(&f), 0.3).unwrap(), f);
        }
    }
}
