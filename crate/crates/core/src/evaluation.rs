//! Cross-view retrieval evaluation: embeddings, distance matrices, rank-k
//! accuracy per view pair and per-attribute summaries.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;

use crate::encoder::{embed, Embedding, EncoderParams};
use crate::geometry::{Attribute, ViewAngle};
use crate::pipeline::SequenceImages;
use crate::projection::{write_pgm, GrayImage};
use crate::{par, seed, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub embedding: Embedding,
    pub identity: String,
    pub view: ViewAngle,
    pub attribute: Attribute,
    pub sequence_id: String,
}

/// Embeddings with unique sequence ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingSet {
    records: Vec<EmbeddingRecord>,
}

impl EmbeddingSet {
    pub fn new(records: Vec<EmbeddingRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.sequence_id.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate sequence id {}",
                    r.sequence_id
                )));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct views, ascending.
    pub fn views(&self) -> Vec<ViewAngle> {
        let mut v: Vec<ViewAngle> = self.records.iter().map(|r| r.view).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn attributes(&self) -> Vec<Attribute> {
        let mut a: Vec<Attribute> = self.records.iter().map(|r| r.attribute).collect();
        a.sort();
        a.dedup();
        a
    }
}

/// Embeds every sequence. With `frames_limit`, each sequence contributes that
/// many frames drawn without replacement (all frames if it is shorter); the
/// draw depends only on `seed` and the sequence id.
pub fn extract_embeddings(
    params: &EncoderParams<f32>,
    sequences: &[SequenceImages],
    frames_limit: Option<usize>,
    seed_value: u64,
) -> Result<EmbeddingSet> {
    if sequences.is_empty() {
        return Err(Error::InvalidArgument("no sequences to embed".into()));
    }
    if frames_limit == Some(0) {
        return Err(Error::InvalidArgument(
            "frame limit must be positive".into(),
        ));
    }
    let results = par::map(sequences, |s| -> Result<Option<EmbeddingRecord>> {
        let n = s.frame_count();
        let sequence_id = s.row.sequence_id();
        if n == 0 {
            log::warn!("skipping {sequence_id}: no frames");
            return Ok(None);
        }
        let frames = match frames_limit {
            Some(m) if m < n => {
                let mut rng =
                    seed::rng(seed::derive(seed_value, &[seed::label_hash(&sequence_id)]));
                Some(sample(&mut rng, n, m).into_vec())
            }
            _ => None,
        };
        let (values, _) = embed(params, &s.to_input(frames.as_deref()))?;
        Ok(Some(EmbeddingRecord {
            embedding: Embedding::new(params.arch.parts, values, Some(s.row.identity.clone())),
            identity: s.row.identity.clone(),
            view: s.row.view,
            attribute: s.row.attribute,
            sequence_id,
        }))
    });
    let mut records = Vec::with_capacity(results.len());
    for r in results {
        if let Some(rec) = r? {
            records.push(rec);
        }
    }
    EmbeddingSet::new(records)
}

pub fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `probes.len() × gallery.len()` Euclidean distances, row-major.
pub fn distance_matrix(probes: &[&[f32]], gallery: &[&[f32]]) -> Vec<f64> {
    let rows = par::map(probes, |p| {
        gallery.iter().map(|g| euclidean(p, g)).collect::<Vec<_>>()
    });
    rows.concat()
}

/// Whether a same-identity entry is among the `k` nearest allowed gallery
/// entries of one probe. Ties in distance keep gallery order.
pub fn hit_at_k<L: PartialEq>(
    row: &[f64],
    probe: &L,
    gallery: &[L],
    allowed: impl Fn(usize) -> bool,
    k: usize,
) -> bool {
    let mut order: Vec<usize> = (0..gallery.len()).filter(|&j| allowed(j)).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
    order.iter().take(k).any(|&j| gallery[j] == *probe)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankResult {
    /// `None` when no probe could be evaluated.
    pub accuracy: Option<f64>,
    pub hits: usize,
    pub evaluated: usize,
    /// Probes whose identity has no gallery entry.
    pub excluded: usize,
}

/// Rank-k accuracy over a row-major `probes × gallery` distance matrix.
pub fn rank_k_accuracy<L: PartialEq>(
    distances: &[f64],
    probes: &[L],
    gallery: &[L],
    k: usize,
) -> RankResult {
    rank_k_accuracy_masked(distances, probes, gallery, k, |_, _| true)
}

/// As [`rank_k_accuracy`], considering only pairs where `allowed(i, j)`.
pub fn rank_k_accuracy_masked<L: PartialEq>(
    distances: &[f64],
    probes: &[L],
    gallery: &[L],
    k: usize,
    allowed: impl Fn(usize, usize) -> bool,
) -> RankResult {
    assert_eq!(
        distances.len(),
        probes.len() * gallery.len(),
        "distance matrix shape"
    );
    let (mut hits, mut evaluated, mut excluded) = (0, 0, 0);
    for (i, p) in probes.iter().enumerate() {
        let present = gallery
            .iter()
            .enumerate()
            .any(|(j, g)| g == p && allowed(i, j));
        if !present {
            excluded += 1;
            continue;
        }
        evaluated += 1;
        let row = &distances[i * gallery.len()..(i + 1) * gallery.len()];
        if hit_at_k(row, p, gallery, |j| allowed(i, j), k) {
            hits += 1;
        }
    }
    if excluded > 0 {
        log::debug!("{excluded} probes without a gallery match were excluded");
    }
    RankResult {
        accuracy: (evaluated > 0).then(|| hits as f64 / evaluated as f64),
        hits,
        evaluated,
        excluded,
    }
}

/// Which side holds the Normal sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GalleryRole {
    /// Normal sequences form the gallery, the attribute's sequences probe it.
    Normal,
    /// The attribute's sequences form the gallery, Normal sequences probe it.
    Variant,
}

impl GalleryRole {
    pub fn name(self) -> &'static str {
        match self {
            GalleryRole::Normal => "normal",
            GalleryRole::Variant => "variant",
        }
    }
}

impl FromStr for GalleryRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(GalleryRole::Normal),
            "variant" => Ok(GalleryRole::Variant),
            _ => Err(Error::InvalidArgument(format!(
                "unknown gallery role {s:?} (normal|variant)"
            ))),
        }
    }
}

/// Probe view × gallery view accuracies; `None` marks cells without probes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalMatrix {
    pub views: Vec<ViewAngle>,
    pub k: usize,
    /// Row-major, probe view major.
    pub cells: Vec<Option<f64>>,
}

impl EvalMatrix {
    pub fn get(&self, probe: usize, gallery: usize) -> Option<f64> {
        self.cells[probe * self.views.len() + gallery]
    }

    /// Mean of the defined cells.
    pub fn mean(&self) -> Option<f64> {
        let defined: Vec<f64> = self.cells.iter().flatten().copied().collect();
        (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
    }

    /// Percentages with two decimals; absent cells are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("probe\\gallery");
        for v in &self.views {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
        for (i, v) in self.views.iter().enumerate() {
            let _ = write!(out, "{v}");
            for j in 0..self.views.len() {
                match self.get(i, j) {
                    Some(a) => {
                        let _ = write!(out, ",{:.2}", 100.0 * a);
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Grayscale rendering, `cell` pixels per entry, accuracy 0..1 mapped to
    /// 0..255; absent cells are black.
    pub fn heatmap(&self, cell: usize) -> GrayImage {
        let n = self.views.len();
        let side = n * cell;
        let mut data = vec![0u8; side * side];
        for i in 0..n {
            for j in 0..n {
                let v = self
                    .get(i, j)
                    .map_or(0, |a| (255.0 * a).round().clamp(0.0, 255.0) as u8);
                for y in i * cell..(i + 1) * cell {
                    data[y * side + j * cell..y * side + (j + 1) * cell].fill(v);
                }
            }
        }
        GrayImage {
            width: side,
            height: side,
            data,
        }
    }

    pub fn write_heatmap(&self, path: &Path) -> Result<()> {
        write_pgm(path, &self.heatmap(16))
    }
}

/// Evaluates every probe/gallery view pair. `probe_filter` selects probe
/// records; the gallery side is chosen by `role`.
fn view_matrix(
    set: &EmbeddingSet,
    k: usize,
    is_probe: impl Fn(&EmbeddingRecord) -> bool + Sync,
    is_gallery: impl Fn(&EmbeddingRecord) -> bool + Sync,
) -> EvalMatrix {
    let views = set.views();
    let recs = set.records();
    let pairs: Vec<(usize, usize)> = (0..views.len())
        .flat_map(|i| (0..views.len()).map(move |j| (i, j)))
        .collect();
    let cells = par::map(&pairs, |&(i, j)| {
        let probes: Vec<&EmbeddingRecord> = recs
            .iter()
            .filter(|r| r.view == views[i] && is_probe(r))
            .collect();
        let gallery: Vec<&EmbeddingRecord> = recs
            .iter()
            .filter(|r| r.view == views[j] && is_gallery(r))
            .collect();
        if probes.is_empty() || gallery.is_empty() {
            return None;
        }
        let pv: Vec<&[f32]> = probes
            .iter()
            .map(|r| r.embedding.values.as_slice())
            .collect();
        let gv: Vec<&[f32]> = gallery
            .iter()
            .map(|r| r.embedding.values.as_slice())
            .collect();
        let d = distance_matrix(&pv, &gv);
        let pl: Vec<&str> = probes.iter().map(|r| r.identity.as_str()).collect();
        let gl: Vec<&str> = gallery.iter().map(|r| r.identity.as_str()).collect();
        rank_k_accuracy_masked(&d, &pl, &gl, k, |a, b| {
            probes[a].sequence_id != gallery[b].sequence_id
        })
        .accuracy
    });
    EvalMatrix { views, k, cells }
}

/// Cross-view matrix for one attribute.
///
/// With [`GalleryRole::Normal`] the probes are the attribute's sequences and
/// the gallery the Normal ones; [`GalleryRole::Variant`] swaps the roles. A
/// sequence is never matched against itself.
pub fn cross_view_matrix(
    set: &EmbeddingSet,
    attribute: Attribute,
    k: usize,
    role: GalleryRole,
) -> EvalMatrix {
    match role {
        GalleryRole::Normal => view_matrix(
            set,
            k,
            |r| r.attribute == attribute,
            |r| r.attribute == Attribute::Normal,
        ),
        GalleryRole::Variant => view_matrix(
            set,
            k,
            |r| r.attribute == Attribute::Normal,
            |r| r.attribute == attribute,
        ),
    }
}

/// Matrix with the probes of all attributes pooled together.
pub fn pooled_matrix(set: &EmbeddingSet, k: usize, role: GalleryRole) -> EvalMatrix {
    match role {
        GalleryRole::Normal => view_matrix(set, k, |_| true, |r| r.attribute == Attribute::Normal),
        GalleryRole::Variant => view_matrix(set, k, |r| r.attribute == Attribute::Normal, |_| true),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub k: usize,
    /// Per attribute in report order; `None` when the attribute is absent.
    pub attributes: Vec<Option<f64>>,
    /// All probes pooled.
    pub overall: Option<f64>,
    /// Mean of the defined attribute means.
    pub mean_of_attributes: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeReport {
    pub role: GalleryRole,
    pub rows: Vec<ReportRow>,
    /// `(attribute, k, matrix)` for every attribute present.
    pub matrices: Vec<(Attribute, usize, EvalMatrix)>,
}

pub fn attribute_report(set: &EmbeddingSet, ks: &[usize], role: GalleryRole) -> AttributeReport {
    let present = set.attributes();
    let mut rows = Vec::new();
    let mut matrices = Vec::new();
    for &k in ks {
        let attributes: Vec<Option<f64>> = Attribute::ALL
            .iter()
            .map(|&a| {
                if !present.contains(&a) {
                    return None;
                }
                let m = cross_view_matrix(set, a, k, role);
                let mean = m.mean();
                matrices.push((a, k, m));
                mean
            })
            .collect();
        let defined: Vec<f64> = attributes.iter().flatten().copied().collect();
        rows.push(ReportRow {
            k,
            overall: pooled_matrix(set, k, role).mean(),
            mean_of_attributes: (!defined.is_empty())
                .then(|| defined.iter().sum::<f64>() / defined.len() as f64),
            attributes,
        });
    }
    AttributeReport {
        role,
        rows,
        matrices,
    }
}

impl AttributeReport {
    pub fn row(&self, k: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.k == k)
    }

    /// Comment lines (`# key: value`), then a header and one row per rank.
    pub fn to_csv(&self, header: &[(String, String)]) -> String {
        let mut out = String::new();
        for (key, value) in header {
            let _ = writeln!(out, "# {key}: {value}");
        }
        out.push_str("rank");
        for a in Attribute::ALL {
            let _ = write!(out, ",{}", a.title());
        }
        out.push_str(",Overall,MeanOfAttributes\n");
        let pct = |v: Option<f64>| v.map_or(String::new(), |a| format!("{:.2}", 100.0 * a));
        for r in &self.rows {
            let _ = write!(out, "rank-{}", r.k);
            for a in &r.attributes {
                let _ = write!(out, ",{}", pct(*a));
            }
            let _ = writeln!(out, ",{},{}", pct(r.overall), pct(r.mean_of_attributes));
        }
        out
    }
}
