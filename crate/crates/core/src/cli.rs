//! Command-line interface: dataset synthesis, projection preview, training
//! and evaluation.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::encoder::{read_architecture, Architecture, EncoderParams, InputMode};
use crate::evaluation::{attribute_report, extract_embeddings, GalleryRole};
use crate::geometry::io::read_sequence_frames;
use crate::geometry::{Attribute, DistanceTag};
use crate::pipeline::{
    frame_image, load_images, preprocess_frame, split_identities, PreprocessConfig, SequenceImages,
    TRAIN_FRACTION,
};
use crate::projection::{parse_view_list, write_pgm, ProjectionView};
use crate::synth::{
    generate_dataset, load_manifest, DatasetConfig, Manifest, ManifestRow, MANIFEST_FILE,
};
use crate::training::{log_csv, train, Preset, TrainState, TrainingConfig};
use crate::{par, Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "lidargait",
    version,
    about = "LiDAR point-cloud gait recognition"
)]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Render the aligned images of one sequence as PGM files.
    Project(ProjectArgs),
    /// Train an encoder.
    Train(TrainArgs),
    /// Evaluate a checkpoint with the cross-view protocol.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of identities (at least 2).
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    pub ids: u32,
    /// Comma-separated walking conditions, e.g. `normal,bag`.
    #[arg(long, default_value = "normal")]
    pub attributes: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated distances (`near`, `far`); one sequence each.
    #[arg(long, default_value = "near")]
    pub distance: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Sequence directory holding `.pcf` frames.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "rv")]
    pub view: ProjectionView,
    #[arg(long)]
    pub out: PathBuf,
    /// Write binary silhouettes instead of depth.
    #[arg(long)]
    pub silhouette: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset root containing `manifest.csv`.
    #[arg(long)]
    pub data: PathBuf,
    /// `key=value` overrides of the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "desk")]
    pub preset: String,
    /// Comma-separated projection views, one encoder branch each.
    #[arg(long, default_value = "rv")]
    pub views: String,
    /// Train on silhouettes instead of depth.
    #[arg(long)]
    pub silhouette: bool,
    /// Checkpoint path (`ENC1`); the optimizer state goes to `<out>.opt`.
    #[arg(long)]
    pub out: PathBuf,
    /// Training log CSV (defaults to `<out>.log.csv`).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Continue from the checkpoint at `--out`.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset root containing `manifest.csv`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Frames sampled per sequence (all when absent).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub frames: Option<u32>,
    #[arg(long, default_value = "normal")]
    pub gallery: String,
    /// Evaluate every identity instead of the held-out split.
    #[arg(long)]
    pub all_identities: bool,
    /// Also render each matrix as a PGM heatmap.
    #[arg(long)]
    pub heatmap: bool,
    /// Seed for frame sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        par::set_threads(n)?;
    }
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Project(a) => cmd_project(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
    }
}

fn parse_list<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect()
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let mut attributes: Vec<Attribute> = parse_list(&a.attributes)?;
    attributes.dedup();
    let mut cfg = DatasetConfig::new(a.ids as usize, attributes, a.seed);
    cfg.distances = parse_list::<DistanceTag>(&a.distance)?;
    let manifest = generate_dataset(&cfg, &a.out)?;
    println!("manifest: {}", a.out.join(MANIFEST_FILE).display());
    println!(
        "{} sequences, {} frames",
        manifest.rows.len(),
        manifest.total_frames()
    );
    Ok(())
}

pub fn cmd_project(a: &ProjectArgs) -> Result<()> {
    if !a.input.is_dir() {
        return Err(Error::InvalidArgument(format!(
            "{} is not a sequence directory",
            a.input.display()
        )));
    }
    let cfg = PreprocessConfig {
        silhouette: a.silhouette,
        ..PreprocessConfig::default()
    };
    let frames = read_sequence_frames(&a.input, cfg.frame_rate)?;
    if frames.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no frames in {}",
            a.input.display()
        )));
    }
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    for (i, f) in frames.iter().enumerate() {
        let img = frame_image(&preprocess_frame(f, &cfg), a.view, &cfg)?;
        write_pgm(&a.out.join(format!("{i:03}.pgm")), &img.to_gray())?;
    }
    println!("{} images written to {}", frames.len(), a.out.display());
    Ok(())
}

/// Applies a `key=value` file (`#` comments, blank lines ignored).
pub fn apply_config_file(cfg: &mut TrainingConfig, text: &str) -> Result<()> {
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("config line {}: expected key=value", n + 1))
        })?;
        cfg.set(key.trim(), value.trim())
            .map_err(|e| Error::InvalidArgument(format!("config line {}: {e}", n + 1)))?;
    }
    cfg.validate()
}

/// Manifest rows of the train or test identities.
pub fn split_rows(
    manifest: &Manifest,
    train_side: bool,
) -> (Vec<ManifestRow>, Vec<String>, Vec<String>) {
    let (train_ids, test_ids) = split_identities(manifest.identities(), TRAIN_FRACTION);
    let keep = if train_side { &train_ids } else { &test_ids };
    let rows = manifest
        .rows
        .iter()
        .filter(|r| keep.binary_search(&r.identity).is_ok())
        .cloned()
        .collect();
    (rows, train_ids, test_ids)
}

fn describe_split(train: &[String], test: &[String]) -> String {
    let range = |v: &[String]| match (v.first(), v.last()) {
        (Some(a), Some(b)) => format!("{a}..{b} ({})", v.len()),
        _ => "none".into(),
    };
    format!("train {} / test {}", range(train), range(test))
}

fn load_split(
    root: &Path,
    rows: &[ManifestRow],
    views: &[ProjectionView],
    silhouette: bool,
) -> Result<Vec<SequenceImages>> {
    let cfg = PreprocessConfig {
        silhouette,
        ..PreprocessConfig::default()
    };
    load_images(root, rows, views, &cfg)
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let preset: Preset = a.preset.parse()?;
    let mut cfg = TrainingConfig::preset(preset);
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        apply_config_file(&mut cfg, &text)?;
    }
    cfg.validate()?;
    let views = parse_view_list(&a.views)?;
    let manifest = load_manifest(&a.data)?;
    let (rows, train_ids, test_ids) = split_rows(&manifest, true);
    println!("split: {}", describe_split(&train_ids, &test_ids));
    println!(
        "schedule: lr0={} milestones={:?} total_iters={} batch=({},{},{})",
        cfg.lr0,
        cfg.milestone_iters(),
        cfg.total_iters,
        cfg.p,
        cfg.k,
        cfg.l
    );
    let input = if a.silhouette {
        InputMode::Silhouette
    } else {
        InputMode::Depth
    };
    let arch = Architecture::standard(views.clone(), train_ids.len()).with_input(input);
    let resume = if a.resume {
        Some(TrainState::load(&a.out)?)
    } else {
        None
    };
    let data = load_split(&a.data, &rows, &views, a.silhouette)?;
    let outcome = train(&data, &arch, &cfg, resume, Some(&a.out))?;
    let log_path = a.log.clone().unwrap_or_else(|| {
        let mut p = a.out.as_os_str().to_os_string();
        p.push(".log.csv");
        PathBuf::from(p)
    });
    fs::write(&log_path, log_csv(&outcome.log)).map_err(|e| Error::io(&log_path, e))?;
    if let (Some(first), Some(last)) = (outcome.log.first(), outcome.log.last()) {
        println!(
            "loss {:.4} -> {:.4} over {} iterations",
            first.loss_total,
            last.loss_total,
            outcome.log.len()
        );
    }
    println!("checkpoint: {} ({})", a.out.display(), arch);
    println!("log: {}", log_path.display());
    Ok(())
}

/// File name suffix identifying the evaluation variant.
pub fn eval_suffix(frames: Option<u32>, role: GalleryRole) -> String {
    let mut s = String::new();
    if let Some(n) = frames {
        s.push_str(&format!("_f{n}"));
    }
    if role == GalleryRole::Variant {
        s.push_str("_variant-gallery");
    }
    s
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let role: GalleryRole = a.gallery.parse()?;
    let arch = read_architecture(&a.ckpt)?;
    let params = EncoderParams::<f32>::load(&a.ckpt)?;
    let manifest = load_manifest(&a.data)?;
    let (rows, train_ids, test_ids) = if a.all_identities {
        let ids = manifest.identities();
        (manifest.rows.clone(), Vec::new(), ids)
    } else {
        split_rows(&manifest, false)
    };
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no sequences to evaluate".into()));
    }
    let data = load_split(
        &a.data,
        &rows,
        &arch.views,
        arch.input == InputMode::Silhouette,
    )?;
    let frames = a.frames.map(|n| n as usize);
    let set = extract_embeddings(&params, &data, frames, a.seed)?;
    let report = attribute_report(&set, &[1, 5], role);
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let suffix = eval_suffix(a.frames, role);
    for (attr, k, m) in &report.matrices {
        let stem = format!("matrix_{}_rank{k}{suffix}", attr.name());
        let path = a.out.join(format!("{stem}.csv"));
        fs::write(&path, m.to_csv()).map_err(|e| Error::io(&path, e))?;
        if a.heatmap {
            m.write_heatmap(&a.out.join(format!("{stem}.pgm")))?;
        }
    }
    let header = vec![
        ("checkpoint".to_string(), arch.to_string()),
        (
            "split".to_string(),
            if a.all_identities {
                format!("all identities ({})", test_ids.len())
            } else {
                describe_split(&train_ids, &test_ids)
            },
        ),
        (
            "frames".to_string(),
            a.frames.map_or("all".to_string(), |n| n.to_string()),
        ),
        ("gallery".to_string(), role.name().to_string()),
    ];
    let path = a.out.join(format!("report{suffix}.csv"));
    fs::write(&path, report.to_csv(&header)).map_err(|e| Error::io(&path, e))?;
    for row in &report.rows {
        let cells: Vec<String> = Attribute::ALL
            .iter()
            .zip(&row.attributes)
            .filter_map(|(a, v)| v.map(|x| format!("{} {:.2}", a.title(), 100.0 * x)))
            .collect();
        println!(
            "rank-{}: {} | overall {}",
            row.k,
            cells.join(", "),
            row.overall
                .map_or("n/a".into(), |x| format!("{:.2}", 100.0 * x))
        );
    }
    println!("report: {}", path.display());
    Ok(())
}
