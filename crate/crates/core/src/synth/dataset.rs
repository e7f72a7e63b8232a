//! On-disk synthetic datasets and their manifest.

use std::fs;
use std::path::{Path, PathBuf};

use super::{generate_sequence, sample_identity, LidarModel};
use crate::geometry::io::{read_sequence_frames, sequence_dir, write_sequence_frames};
use crate::geometry::{Attribute, DistanceTag, GaitSequence, ViewAngle};
use crate::{par, seed, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.csv";
const MANIFEST_HEADER: &str = "identity,attribute,seq,view_deg,distance,frames";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub n_ids: usize,
    pub views: Vec<ViewAngle>,
    pub attributes: Vec<Attribute>,
    /// One sequence per distance; the sequence number is the index here.
    pub distances: Vec<DistanceTag>,
    pub seed: u64,
    pub lidar: LidarModel,
}

impl DatasetConfig {
    pub fn new(n_ids: usize, attributes: Vec<Attribute>, seed: u64) -> Self {
        Self {
            n_ids,
            views: ViewAngle::all(),
            attributes,
            distances: vec![DistanceTag::Near],
            seed,
            lidar: LidarModel::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ids < 2 {
            return Err(Error::InvalidArgument(
                "a dataset needs at least 2 identities".into(),
            ));
        }
        if self.views.is_empty() || self.attributes.is_empty() || self.distances.is_empty() {
            return Err(Error::InvalidArgument(
                "views, attributes and distances must be nonempty".into(),
            ));
        }
        Ok(())
    }
}

pub fn identity_label(index: usize) -> String {
    format!("id{index:04}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub identity: String,
    pub attribute: Attribute,
    pub seq: u32,
    pub view: ViewAngle,
    pub distance: DistanceTag,
    pub frames: usize,
}

impl ManifestRow {
    pub fn dir(&self, root: &Path) -> PathBuf {
        sequence_dir(
            root,
            &self.identity,
            self.attribute,
            self.seq,
            self.view.degrees(),
        )
    }

    /// Unique key of the sequence, e.g. `id0003/bag-00/090`.
    pub fn sequence_id(&self) -> String {
        format!(
            "{}/{}-{:02}/{}",
            self.identity, self.attribute, self.seq, self.view
        )
    }

    pub fn load(&self, root: &Path, frame_rate: f64) -> Result<GaitSequence> {
        let frames = read_sequence_frames(&self.dir(root), frame_rate)?;
        GaitSequence::new(
            frames,
            self.identity.clone(),
            self.view,
            self.attribute,
            self.distance,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.identity,
                r.attribute,
                r.seq,
                r.view.degrees(),
                r.distance,
                r.frames
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, why: &str| Error::format("manifest", format!("line {line}: {why}"));
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == MANIFEST_HEADER => {}
            _ => return Err(bad(1, "unexpected header")),
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(i + 1, "expected 6 fields"));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| bad(i + 1, "bad number"))
            };
            rows.push(ManifestRow {
                identity: f[0].trim().to_string(),
                attribute: f[1].parse()?,
                seq: num(f[2])? as u32,
                view: ViewAngle::new(num(f[3])? as u16)?,
                distance: f[4].parse()?,
                frames: num(f[5])? as usize,
            });
        }
        Ok(Self { rows })
    }

    /// Distinct identities in sorted order.
    pub fn identities(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.rows.iter().map(|r| r.identity.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn total_frames(&self) -> usize {
        self.rows.iter().map(|r| r.frames).sum()
    }
}

pub fn load_manifest(root: &Path) -> Result<Manifest> {
    let path = root.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Manifest::from_csv(&text)
}

/// Writes every (identity, attribute, distance, view) walk under `root` and
/// a manifest listing them. On failure everything this call created is
/// removed again.
pub fn generate_dataset(cfg: &DatasetConfig, root: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let existed = root.exists();
    let result = write_dataset(cfg, root);
    if result.is_err() {
        if existed {
            for i in 0..cfg.n_ids {
                let _ = fs::remove_dir_all(root.join(identity_label(i)));
            }
            let _ = fs::remove_file(root.join(MANIFEST_FILE));
        } else {
            let _ = fs::remove_dir_all(root);
        }
    }
    result
}

fn write_dataset(cfg: &DatasetConfig, root: &Path) -> Result<Manifest> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let profiles: Vec<_> = (0..cfg.n_ids)
        .map(|i| sample_identity(seed::derive(cfg.seed, &[0, i as u64])))
        .collect();

    let mut tasks = Vec::new();
    for id in 0..cfg.n_ids {
        for &attribute in &cfg.attributes {
            for (seq, &distance) in cfg.distances.iter().enumerate() {
                for &view in &cfg.views {
                    tasks.push((id, attribute, seq as u32, distance, view));
                }
            }
        }
    }

    let rows = par::map(&tasks, |&(id, attribute, seq, distance, view)| {
        let identity = identity_label(id);
        // The walk seed ignores the attribute so conditions share a gait phase.
        let walk_seed = seed::derive(cfg.seed, &[1, id as u64, view.degrees() as u64, seq as u64]);
        let sequence = generate_sequence(
            &identity,
            &profiles[id],
            view,
            distance,
            attribute,
            &cfg.lidar,
            walk_seed,
        )?;
        let row = ManifestRow {
            identity,
            attribute,
            seq,
            view,
            distance,
            frames: sequence.frames.len(),
        };
        write_sequence_frames(&row.dir(root), &sequence.frames)?;
        Ok(row)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest { rows };
    let path = root.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_csv()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n_ids: usize, seed: u64) -> DatasetConfig {
        let mut cfg = DatasetConfig::new(n_ids, vec![Attribute::Normal], seed);
        cfg.views = vec![ViewAngle::new(0).unwrap(), ViewAngle::new(90).unwrap()];
        cfg
    }

    #[test]
    fn counts_sequences() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = DatasetConfig::new(2, vec![Attribute::Normal], 7);
        let m = generate_dataset(&cfg, dir.path()).unwrap();
        assert_eq!(m.rows.len(), 24);
        assert_eq!(load_manifest(dir.path()).unwrap(), m);
        let seq = m.rows[5].load(dir.path(), 10.0).unwrap();
        assert_eq!(seq.frames.len(), m.rows[5].frames);
    }

    #[test]
    fn rejects_single_identity() {
        let dir = tempfile::tempdir().unwrap();
        assert!(generate_dataset(&small(1, 0), dir.path()).is_err());
    }

    #[test]
    fn manifest_csv_round_trip() {
        let m = Manifest {
            rows: vec![ManifestRow {
                identity: "id0001".into(),
                attribute: Attribute::Umbrella,
                seq: 0,
                view: ViewAngle::new(330).unwrap(),
                distance: DistanceTag::Far,
                frames: 30,
            }],
        };
        let text = m.to_csv();
        assert_eq!(
            text,
            "identity,attribute,seq,view_deg,distance,frames\nid0001,umbrella,0,330,far,30\n"
        );
        assert_eq!(Manifest::from_csv(&text).unwrap(), m);
        assert!(Manifest::from_csv("nope\n").is_err());
    }

    #[test]
    fn unwritable_root_fails_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, b"x").unwrap();
        assert!(generate_dataset(&small(2, 1), &file.join("data")).is_err());
    }

    #[test]
    fn partial_output_is_removed() {
        let dir = tempfile::tempdir().unwrap();
        // A file where the second identity's directory should go.
        fs::write(dir.path().join(identity_label(1)), b"x").unwrap();
        assert!(generate_dataset(&small(2, 1), dir.path()).is_err());
        assert!(!dir.path().join(identity_label(0)).exists());
        assert!(!dir.path().join(MANIFEST_FILE).exists());
    }
}
