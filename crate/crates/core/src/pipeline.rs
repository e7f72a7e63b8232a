//! Point cloud sequence to network input: filtering, projection, intensity
//! normalization and alignment, plus loading of whole dataset splits.

use std::path::Path;

use crate::encoder::{SequenceInput, Tensor};
use crate::geometry::{
    crop_roi, denoise, remove_ground, PointFrame, Region3, DEFAULT_DENOISE_CELL,
};
use crate::projection::{
    align_and_resize, normalize_depth, project, silhouette_from_depth, AlignedImage,
    ProjectionConfig, ProjectionView, ALIGNED_SIDE,
};
use crate::synth::{LidarModel, ManifestRow};
use crate::{par, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub region: Region3,
    pub denoise_cell: f32,
    /// Ground removal lift; `None` skips the step (synthetic scans have no
    /// ground returns).
    pub ground_lift: Option<f32>,
    /// Angular and orthographic resolution; the view field is ignored.
    pub projection: ProjectionConfig,
    /// Binarize images instead of keeping depth.
    pub silhouette: bool,
    pub frame_rate: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            region: Region3::synthetic_walkway(),
            denoise_cell: DEFAULT_DENOISE_CELL,
            ground_lift: None,
            projection: ProjectionConfig::default(),
            silhouette: false,
            frame_rate: LidarModel::default().frame_rate,
        }
    }
}

pub fn preprocess_frame(frame: &PointFrame, cfg: &PreprocessConfig) -> PointFrame {
    let mut f = crop_roi(frame, &cfg.region);
    if let Some(lift) = cfg.ground_lift {
        f = remove_ground(&f, lift);
    }
    denoise(&f, cfg.denoise_cell)
}

/// One aligned 64×64 image of a filtered frame.
pub fn frame_image(
    frame: &PointFrame,
    view: ProjectionView,
    cfg: &PreprocessConfig,
) -> Result<AlignedImage> {
    let mut pcfg = cfg.projection;
    pcfg.view = view;
    let depth = project(frame, &pcfg)?;
    let aligned = align_and_resize(&normalize_depth(&depth));
    Ok(if cfg.silhouette {
        silhouette_from_depth(&aligned)
    } else {
        aligned
    })
}

/// Images of every frame, indexed `[view][frame]`.
pub fn sequence_images(
    frames: &[PointFrame],
    views: &[ProjectionView],
    cfg: &PreprocessConfig,
) -> Result<Vec<Vec<AlignedImage>>> {
    let filtered: Vec<PointFrame> = frames.iter().map(|f| preprocess_frame(f, cfg)).collect();
    views
        .iter()
        .map(|&v| filtered.iter().map(|f| frame_image(f, v, cfg)).collect())
        .collect()
}

/// A sequence from the manifest with its images ready for the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceImages {
    pub row: ManifestRow,
    /// `[view][frame]`.
    pub views: Vec<Vec<AlignedImage>>,
}

impl SequenceImages {
    pub fn frame_count(&self) -> usize {
        self.views.first().map_or(0, Vec::len)
    }

    /// Encoder input from the given frame indices (all frames when `None`).
    pub fn to_input(&self, frames: Option<&[usize]>) -> SequenceInput<f32> {
        let all: Vec<usize>;
        let idx = match frames {
            Some(f) => f,
            None => {
                all = (0..self.frame_count()).collect();
                &all
            }
        };
        SequenceInput {
            views: self
                .views
                .iter()
                .map(|v| {
                    idx.iter()
                        .map(|&i| {
                            Tensor::from_image(v[i].data(), ALIGNED_SIDE, ALIGNED_SIDE)
                                .expect("aligned images are 64×64")
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Loads and converts the listed sequences in parallel, preserving order.
pub fn load_images(
    root: &Path,
    rows: &[ManifestRow],
    views: &[ProjectionView],
    cfg: &PreprocessConfig,
) -> Result<Vec<SequenceImages>> {
    par::map(rows, |row| {
        let seq = row.load(root, cfg.frame_rate)?;
        Ok(SequenceImages {
            row: row.clone(),
            views: sequence_images(&seq.frames, views, cfg)?,
        })
    })
    .into_iter()
    .collect()
}

/// Identities sorted by label; the first `⌊fraction·n⌉` train, the rest test.
pub fn split_identities(
    mut identities: Vec<String>,
    train_fraction: f64,
) -> (Vec<String>, Vec<String>) {
    identities.sort();
    identities.dedup();
    let n_train = ((identities.len() as f64) * train_fraction).round() as usize;
    let test = identities.split_off(n_train.min(identities.len()));
    (identities, test)
}

pub const TRAIN_FRACTION: f64 = 0.75;
